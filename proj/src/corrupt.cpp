#include "rcdiag/corrupt.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_set>

#include "rcdiag/hash.hpp"
#include "rcdiag/rng.hpp"

namespace rcdiag {

namespace {

std::vector<std::string> split_space(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

void require_at_least_two(const Dataset& dataset, const char* op) {
    if (dataset.examples.size() < 2)
        throw TransformError(std::string(op) +
                             ": need at least 2 examples, no derangement exists");
}

}  // namespace

Dataset shuffle_questions(const Dataset& dataset, std::uint64_t seed) {
    require_at_least_two(dataset, "shuffle_questions");
    Rng rng(seed);
    const std::vector<std::size_t> perm = rng.derangement(dataset.examples.size());
    Dataset out = dataset;
    for (std::size_t i = 0; i < out.examples.size(); ++i)
        out.examples[i].question = dataset.examples[perm[i]].question;
    out.meta.corruption_history.push_back({"question_shuffle", seed, {}});
    return out;
}

Dataset shuffle_passages(const Dataset& dataset, std::uint64_t seed) {
    require_at_least_two(dataset, "shuffle_passages");
    Rng rng(seed);
    const std::vector<std::size_t> perm = rng.derangement(dataset.examples.size());
    Dataset out = dataset;
    for (std::size_t i = 0; i < out.examples.size(); ++i)
        out.examples[i].passage = dataset.examples[perm[i]].passage;
    out.meta.corruption_history.push_back({"passage_shuffle", seed, {}});
    return out;
}

// ---------------------------------------------------------------------------
// Gibberish passages

namespace {

// Candidate-mode rewrite of one example. The passage keeps its sentence
// count and per-sentence lengths so length features carry no signal.
void gibberish_candidates_one(Example& ex, Rng rng) {
    if (ex.candidates.empty())
        throw TransformError("gibberish_passage: example '" + ex.id + "' has no candidates");

    std::vector<std::vector<std::string>> cand_tokens;
    std::unordered_set<std::string> cand_token_set;
    for (const std::string& cand : ex.candidates) {
        cand_tokens.push_back(split_space(cand));
        for (const std::string& tok : cand_tokens.back()) cand_token_set.insert(tok);
    }

    std::vector<Sentence> fresh;
    std::vector<std::vector<bool>> taken;
    for (const Sentence& sent : ex.passage) {
        fresh.emplace_back(sent.size());
        taken.emplace_back(sent.size(), false);
    }

    // Place candidates in list order, each exactly once, choosing uniformly
    // among every free contiguous slot that fits.
    for (const std::vector<std::string>& tokens : cand_tokens) {
        std::vector<std::pair<std::size_t, std::size_t>> slots;
        for (std::size_t s = 0; s < fresh.size(); ++s) {
            if (fresh[s].size() < tokens.size()) continue;
            for (std::size_t start = 0; start + tokens.size() <= fresh[s].size(); ++start) {
                bool free = true;
                for (std::size_t k = 0; k < tokens.size(); ++k)
                    if (taken[s][start + k]) free = false;
                if (free) slots.emplace_back(s, start);
            }
        }
        if (slots.empty())
            throw TransformError("gibberish_passage: no room to place candidate in example '" +
                                 ex.id + "'");
        const auto [s, start] = slots[rng.next_below(slots.size())];
        for (std::size_t k = 0; k < tokens.size(); ++k) {
            fresh[s][start + k] = tokens[k];
            taken[s][start + k] = true;
        }
    }
    ex.passage = std::move(fresh);
    // The eligible filler vocabulary is installed by the caller; positions
    // still false in `taken` are filled there.
    for (std::size_t s = 0; s < ex.passage.size(); ++s)
        for (std::size_t p = 0; p < ex.passage[s].size(); ++p)
            if (!taken[s][p]) ex.passage[s][p].clear();
}

void fill_gibberish(Example& ex, const std::vector<std::string>& filler_vocab, Rng& rng) {
    if (filler_vocab.empty())
        throw TransformError("gibberish_passage: no eligible filler tokens for example '" +
                             ex.id + "'");
    for (Sentence& sent : ex.passage)
        for (std::string& tok : sent)
            if (tok.empty()) tok = filler_vocab[rng.next_below(filler_vocab.size())];
}

std::string passage_key(const std::vector<Sentence>& passage) {
    std::string key;
    for (const Sentence& sent : passage) {
        for (const std::string& tok : sent) {
            key += tok;
            key.push_back('\x1f');
        }
        key.push_back('\x1e');
    }
    return key;
}

}  // namespace

Dataset gibberish_passage(const Dataset& dataset, std::uint64_t seed, bool span_mode) {
    Dataset out = dataset;
    const Rng base(seed);

    if (!span_mode) {
        std::vector<std::string> corpus = dataset.vocabulary.corpus_tokens();
        for (std::size_t i = 0; i < out.examples.size(); ++i) {
            Example& ex = out.examples[i];
            Rng rng = base.fork(i);
            gibberish_candidates_one(ex, rng);
            std::unordered_set<std::string> excluded;
            for (const std::string& cand : ex.candidates)
                for (const std::string& tok : split_space(cand)) excluded.insert(tok);
            std::vector<std::string> filler;
            for (const std::string& tok : corpus)
                if (!excluded.count(tok)) filler.push_back(tok);
            fill_gibberish(ex, filler, rng);
        }
    } else {
        for (const Example& ex : dataset.examples)
            if (!ex.answer.is_span())
                throw TransformError("gibberish_passage: span mode requires span answers ('" +
                                     ex.id + "' has none)");

        // Group examples sharing one original passage.
        std::vector<std::vector<std::size_t>> groups;
        std::map<std::string, std::size_t> group_of;
        for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
            const std::string key = passage_key(dataset.examples[i].passage);
            auto it = group_of.find(key);
            if (it == group_of.end()) {
                group_of.emplace(key, groups.size());
                groups.push_back({i});
            } else {
                groups[it->second].push_back(i);
            }
        }

        const std::vector<std::string> corpus = dataset.vocabulary.corpus_tokens();
        for (std::size_t g = 0; g < groups.size(); ++g) {
            Rng rng = base.fork(g);
            std::vector<std::size_t> order = groups[g];
            rng.shuffle(order);

            std::unordered_set<std::string> excluded;
            for (std::size_t idx : order)
                for (const std::string& tok :
                     split_space(dataset.examples[idx].answer.text))
                    excluded.insert(tok);
            std::vector<std::string> filler;
            for (const std::string& tok : corpus)
                if (!excluded.count(tok)) filler.push_back(tok);
            if (filler.empty())
                throw TransformError("gibberish_passage: no eligible filler tokens in group " +
                                     std::to_string(g));

            Sentence flat;
            auto emit_filler = [&] {
                const std::uint64_t run = 1 + rng.next_below(10);
                for (std::uint64_t k = 0; k < run; ++k)
                    flat.push_back(filler[rng.next_below(filler.size())]);
            };
            std::vector<std::pair<int, int>> spans(order.size());
            for (std::size_t j = 0; j < order.size(); ++j) {
                emit_filler();
                const int start = static_cast<int>(flat.size());
                for (const std::string& tok :
                     split_space(dataset.examples[order[j]].answer.text))
                    flat.push_back(tok);
                spans[j] = {start, static_cast<int>(flat.size())};
            }
            emit_filler();

            for (std::size_t j = 0; j < order.size(); ++j) {
                Example& ex = out.examples[order[j]];
                ex.passage = {flat};
                ex.answer.span = SpanAnswer{0, spans[j].first, spans[j].second, ex.answer.text};
            }
        }
    }

    out.meta.corruption_history.push_back(
        {"gibberish_passage", seed, {{"span_mode", span_mode}}});
    return out;
}

Dataset truncate_passage(const Dataset& dataset, int keep_last_k, bool from_start) {
    if (keep_last_k < 1) throw TransformError("truncate_passage: keep_last_k must be >= 1");
    Dataset out = dataset;
    for (Example& ex : out.examples) {
        const std::size_t keep =
            std::min(ex.passage.size(), static_cast<std::size_t>(keep_last_k));
        if (keep == ex.passage.size()) continue;
        if (from_start)
            ex.passage.assign(ex.passage.begin(),
                              ex.passage.begin() + static_cast<std::ptrdiff_t>(keep));
        else
            ex.passage.assign(ex.passage.end() - static_cast<std::ptrdiff_t>(keep),
                              ex.passage.end());
    }
    CorruptionSpec spec{"truncate_passage", 0, {{"keep_last_k", std::int64_t{keep_last_k}}}};
    if (from_start) spec.params["from_start"] = true;
    out.meta.corruption_history.push_back(std::move(spec));
    return out;
}

// ---------------------------------------------------------------------------
// Entity anonymization

namespace {

std::string marker_for(std::size_t n) { return "@entity" + std::to_string(n); }

}  // namespace

Dataset anonymize_entities(const Dataset& dataset, const std::set<std::string>& entity_lexicon,
                           std::uint64_t seed) {
    if (entity_lexicon.empty())
        throw TransformError("anonymize_entities: entity lexicon is empty");
    Dataset out = dataset;
    const Rng base(seed);

    for (std::size_t i = 0; i < out.examples.size(); ++i) {
        Example& ex = out.examples[i];
        Rng rng = base.fork(i);

        // Distinct entities in first-occurrence order across passage,
        // question and candidates.
        std::vector<std::string> entities;
        std::unordered_set<std::string> seen;
        auto note = [&](const std::string& tok) {
            if (entity_lexicon.count(tok) && seen.insert(tok).second) entities.push_back(tok);
        };
        for (const Sentence& sent : ex.passage)
            for (const std::string& tok : sent) note(tok);
        for (const std::string& tok : ex.question) note(tok);
        for (const std::string& cand : ex.candidates) note(cand);

        std::vector<std::size_t> numbers(entities.size());
        for (std::size_t k = 0; k < numbers.size(); ++k) numbers[k] = k + 1;
        rng.shuffle(numbers);
        std::unordered_map<std::string, std::string> mapping;
        for (std::size_t k = 0; k < entities.size(); ++k)
            mapping[entities[k]] = marker_for(numbers[k]);

        auto remap = [&](std::string& tok) {
            auto it = mapping.find(tok);
            if (it != mapping.end()) tok = it->second;
        };
        for (Sentence& sent : ex.passage)
            for (std::string& tok : sent) remap(tok);
        for (std::string& tok : ex.question) remap(tok);
        for (std::string& cand : ex.candidates) remap(cand);

        if (ex.answer.is_span()) {
            // Token-for-token replacement keeps span indices valid; refresh
            // the recorded text.
            SpanAnswer& span = *ex.answer.span;
            const Sentence& sent = ex.passage[static_cast<std::size_t>(span.sentence)];
            std::string text;
            for (int t = span.start; t < span.end; ++t) {
                if (t > span.start) text.push_back(' ');
                text += sent[static_cast<std::size_t>(t)];
            }
            span.text = text;
            ex.answer.text = text;
        } else if (entity_lexicon.count(ex.answer.text)) {
            auto it = mapping.find(ex.answer.text);
            if (it == mapping.end())
                throw ValidationError("anonymize_entities: answer entity '" + ex.answer.text +
                                      "' never occurs in example '" + ex.id + "'");
            ex.answer.text = it->second;
            bool found = std::find(ex.candidates.begin(), ex.candidates.end(),
                                   ex.answer.text) != ex.candidates.end();
            for (const Sentence& sent : ex.passage)
                for (const std::string& tok : sent)
                    if (tok == ex.answer.text) found = true;
            if (!found)
                throw ValidationError("anonymize_entities: answer entity absent from passage "
                                      "and candidates after mapping in example '" +
                                      ex.id + "'");
        }
    }

    out.vocabulary = build_vocabulary(out.examples);
    std::string lexicon_bytes;
    for (const std::string& e : entity_lexicon) {
        lexicon_bytes += e;
        lexicon_bytes.push_back('\n');
    }
    out.meta.corruption_history.push_back(
        {"anonymize_entities",
         seed,
         {{"entity_count", static_cast<std::int64_t>(entity_lexicon.size())},
          {"entities_fnv", hex64(fnv1a64(lexicon_bytes))}}});
    return out;
}

// ---------------------------------------------------------------------------
// Declarative dispatch

Dataset apply_corruption(const Dataset& dataset, const CorruptionSpec& spec) {
    auto int_param = [&](const char* key, std::int64_t fallback) {
        auto it = spec.params.find(key);
        if (it == spec.params.end()) return fallback;
        if (!std::holds_alternative<std::int64_t>(it->second))
            throw TransformError("corruption param '" + std::string(key) + "' must be an integer");
        return std::get<std::int64_t>(it->second);
    };
    auto bool_param = [&](const char* key, bool fallback) {
        auto it = spec.params.find(key);
        if (it == spec.params.end()) return fallback;
        if (!std::holds_alternative<bool>(it->second))
            throw TransformError("corruption param '" + std::string(key) + "' must be a bool");
        return std::get<bool>(it->second);
    };

    Dataset out;
    if (spec.kind == "question_shuffle") {
        out = shuffle_questions(dataset, spec.seed);
    } else if (spec.kind == "passage_shuffle") {
        out = shuffle_passages(dataset, spec.seed);
    } else if (spec.kind == "gibberish_passage") {
        out = gibberish_passage(dataset, spec.seed, bool_param("span_mode", false));
    } else if (spec.kind == "truncate_passage") {
        out = truncate_passage(dataset, static_cast<int>(int_param("keep_last_k", 1)),
                               bool_param("from_start", false));
    } else if (spec.kind == "anonymize_entities") {
        auto it = spec.params.find("entities");
        if (it == spec.params.end() || !std::holds_alternative<std::string>(it->second))
            throw TransformError("anonymize_entities needs an 'entities' param (comma-joined)");
        std::set<std::string> lexicon;
        std::string cur;
        for (char c : std::get<std::string>(it->second) + ",") {
            if (c == ',') {
                if (!cur.empty()) lexicon.insert(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        out = anonymize_entities(dataset, lexicon, spec.seed);
    } else {
        throw TransformError("unknown corruption kind '" + spec.kind + "'");
    }
    // History records the spec as given, so applying [s1, s2] leaves
    // exactly [s1, s2] appended.
    out.meta.corruption_history.back() = spec;
    return out;
}

}  // namespace rcdiag
