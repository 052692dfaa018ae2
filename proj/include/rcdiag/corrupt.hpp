#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "rcdiag/corpus.hpp"

namespace rcdiag {

// Information-voiding transforms. All of them are pure functions of
// (dataset, seed): the same inputs give byte-identical canonical output.
// Each appends its CorruptionSpec to the dataset's history.

// Permutes questions across examples by a seeded derangement, keeping each
// example's passage, candidates and answer. Voids question information:
// this is the P-only training condition.
Dataset shuffle_questions(const Dataset& dataset, std::uint64_t seed);

// Permutes passages by a seeded derangement, keeping (question, answer)
// pairs. Voids passage information: the Q-only condition.
Dataset shuffle_passages(const Dataset& dataset, std::uint64_t seed);

// Candidate mode: rebuilds every passage with the original sentence-length
// profile, places each candidate exactly once at a random position and
// fills the rest with tokens drawn uniformly from the vocabulary minus the
// candidates and reserved tokens.
//
// Span mode: groups examples sharing one passage, lays the group's answer
// texts out in random order separated by runs of 1-10 filler tokens, and
// recomputes each example's gold span to its own answer's new location.
Dataset gibberish_passage(const Dataset& dataset, std::uint64_t seed, bool span_mode = false);

// Keeps the final min(k, len) sentences of every passage. Deterministic;
// no seed. `from_start` keeps the beginning instead (off by default, the
// last-sentence experiment is the one the tables report).
Dataset truncate_passage(const Dataset& dataset, int keep_last_k, bool from_start = false);

// Replaces every lexicon entity inside one example with a marker
// "@entityN"; N is a per-example seeded random bijection so identities
// cannot be memorized across examples. Answers are remapped consistently;
// the vocabulary is rebuilt because markers are new tokens.
Dataset anonymize_entities(const Dataset& dataset, const std::set<std::string>& entity_lexicon,
                           std::uint64_t seed);

// Dispatch on a declarative spec. Unknown kind -> TransformError.
// Recognized params: keep_last_k, from_start (truncate_passage);
// span_mode (gibberish_passage); entities as a comma-joined list
// (anonymize_entities).
Dataset apply_corruption(const Dataset& dataset, const CorruptionSpec& spec);

}  // namespace rcdiag
