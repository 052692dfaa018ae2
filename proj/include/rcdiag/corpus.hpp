#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "rcdiag/errors.hpp"

namespace rcdiag {

// Reserved vocabulary entries. PLACEHOLDER marks the blank in a cloze
// question; it is written literally into question token sequences.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kPlaceholderId = 2;
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kPlaceholderToken = "<placeholder>";

// Token string <-> dense id map. Ids 0..2 are reserved; corpus tokens start
// at id 3 and are dense (max id == size() - 1).
class Vocabulary {
public:
    Vocabulary();

    // Adds a corpus token (no-op when already present). Reserved token
    // strings keep their reserved ids.
    int add(const std::string& token);

    // Id for `token`, or UNK when unknown.
    int id(const std::string& token) const;

    bool contains(const std::string& token) const;

    // Token string for a valid id.
    const std::string& token(int id) const;

    // Total entries including the three reserved ids.
    std::size_t size() const { return id_to_token_.size(); }

    // Corpus tokens in id order (ids 3..size-1).
    std::vector<std::string> corpus_tokens() const;

    bool operator==(const Vocabulary& other) const {
        return id_to_token_ == other.id_to_token_;
    }

private:
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
};

using Sentence = std::vector<std::string>;

// Answer given as a token span inside the passage; `end` is exclusive.
struct SpanAnswer {
    int sentence = 0;
    int start = 0;
    int end = 0;
    std::string text;

    bool operator==(const SpanAnswer&) const = default;
};

struct Answer {
    // Cloze / classification answers hold only text; span answers also
    // carry their location.
    std::string text;
    std::optional<SpanAnswer> span;

    bool is_span() const { return span.has_value(); }
    bool operator==(const Answer&) const = default;
};

struct Example {
    std::string id;
    std::vector<Sentence> passage;
    Sentence question;  // contains exactly one placeholder for cloze tasks
    std::vector<std::string> candidates;
    Answer answer;

    bool operator==(const Example&) const = default;
};

// One corruption applied to a dataset; kept in the dataset's history so
// every derived file records how it was produced.
struct CorruptionSpec {
    std::string kind;
    std::uint64_t seed = 0;
    // Params keep their natural types so the canonical JSON round-trips.
    std::map<std::string, std::variant<std::int64_t, bool, std::string>> params;

    bool operator==(const CorruptionSpec&) const = default;
};

struct DatasetMeta {
    std::string source_family = "canonical";  // babi | cbt | canonical
    std::string split = "train";
    std::vector<CorruptionSpec> corruption_history;

    bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
    std::vector<Example> examples;
    Vocabulary vocabulary;
    DatasetMeta meta;

    bool operator==(const Dataset&) const = default;
};

// Whitespace split with terminal punctuation (. ? ! ,) detached as separate
// tokens. bAbI text is additionally lowercased by its parser; CBT keeps
// case because entity capitalization is part of the signal.
std::vector<std::string> tokenize(const std::string& text, bool lowercase);

// Frequency-ranked vocabulary over passages, questions, candidates and
// answer texts. Tokens below min_count are dropped (they will resolve to
// UNK); ids go by descending frequency, ties broken lexicographically.
Vocabulary build_vocabulary(const std::vector<Example>& examples, int min_count = 1);

// bAbI task format: numbered lines; a line numbered 1 starts a new story;
// question lines carry tab-separated question / answer / supporting-fact
// ids. Each question becomes one Example whose passage is every statement
// seen so far in the story. Questions get a trailing placeholder token so
// wh-questions share the cloze interface. Candidates are left empty; see
// assign_candidates_from_answers.
Dataset parse_babi(const std::string& text);

// CBT block format: 21 numbered lines per block (20 passage sentences, then
// the cloze question line "21 ... XXXXX ...<TAB>answer<TAB>c1|...|c10"),
// blocks separated by blank lines. Empty tab fields are ignored.
Dataset parse_cbt(const std::string& text);

// The per-task answer inventory observed in `source`, sorted, installed as
// the candidate set of every example in `target`. This is how bAbI datasets
// get their candidate sets (the format itself defines none).
void assign_candidates_from_answers(Dataset& target, const Dataset& source);

// Canonical JSON Lines serialization. First record is the metadata (with
// the vocabulary, so reads reconstruct an identical dataset), then one
// example record per line.
void write_canonical(const Dataset& dataset, std::ostream& out);
std::string canonical_string(const Dataset& dataset);
Dataset read_canonical(std::istream& in);
Dataset read_canonical_string(const std::string& text);

Dataset load_canonical_file(const std::string& path);
void save_canonical_file(const Dataset& dataset, const std::string& path);

// Checks the type invariants (CBT shape, answer membership, span extraction,
// placeholder count). Throws ValidationError naming the offending example.
void validate(const Dataset& dataset);

}  // namespace rcdiag
