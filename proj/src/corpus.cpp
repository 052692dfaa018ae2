#include "rcdiag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rcdiag {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
    id_to_token_ = {kPadToken, kUnkToken, kPlaceholderToken};
    token_to_id_ = {{kPadToken, kPadId}, {kUnkToken, kUnkId}, {kPlaceholderToken, kPlaceholderId}};
}

int Vocabulary::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return token_to_id_.find(token) != token_to_id_.end();
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
        throw Error("Vocabulary::token: id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::corpus_tokens() const {
    return {id_to_token_.begin() + 3, id_to_token_.end()};
}

// ---------------------------------------------------------------------------
// Tokenization

std::vector<std::string> tokenize(const std::string& text, bool lowercase) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto is_terminal = [](char c) { return c == '.' || c == '?' || c == '!' || c == ','; };
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        std::size_t j = i;
        while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        std::string tok = text.substr(i, j - i);
        i = j;
        if (lowercase) {
            for (char& c : tok)
                c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
        // Detach terminal punctuation, preserving character order.
        std::string detached;
        while (tok.size() > 1 && is_terminal(tok.back())) {
            detached.push_back(tok.back());
            tok.pop_back();
        }
        out.push_back(tok);
        for (auto it = detached.rbegin(); it != detached.rend(); ++it)
            out.push_back(std::string(1, *it));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vocabulary construction

namespace {

bool is_reserved_token(const std::string& tok) {
    return tok == kPadToken || tok == kUnkToken || tok == kPlaceholderToken;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<Example>& examples, int min_count) {
    if (min_count < 1) throw Error("build_vocabulary: min_count must be >= 1");
    std::unordered_map<std::string, long> counts;
    auto bump = [&](const std::string& tok) {
        if (!is_reserved_token(tok)) ++counts[tok];
    };
    for (const Example& ex : examples) {
        for (const Sentence& sent : ex.passage)
            for (const std::string& tok : sent) bump(tok);
        for (const std::string& tok : ex.question) bump(tok);
        for (const std::string& cand : ex.candidates) bump(cand);
        if (!ex.answer.text.empty()) bump(ex.answer.text);
    }
    std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    Vocabulary vocab;
    for (const auto& [tok, count] : ranked) {
        if (count >= min_count) vocab.add(tok);
    }
    return vocab;
}

// ---------------------------------------------------------------------------
// bAbI parser

namespace {

// Leading positive integer of a line; advances `pos` past the following
// space. Returns -1 when the line does not start with digits.
int leading_number(const std::string& line, std::size_t& pos) {
    std::size_t j = 0;
    while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
    if (j == 0) return -1;
    int value = 0;
    for (std::size_t k = 0; k < j; ++k) value = value * 10 + (line[k] - '0');
    pos = j;
    if (pos < line.size() && line[pos] == ' ') ++pos;
    return value;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string lowercased(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

Dataset parse_babi(const std::string& text) {
    if (text.empty()) throw ParseError("parse_babi: empty input");
    Dataset ds;
    ds.meta.source_family = "babi";

    const std::vector<std::string> lines = split_lines(text);
    std::vector<Sentence> story;
    int story_index = 0;
    int prev_number = 0;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        if (line.empty()) {
            // Tolerate trailing blank lines only.
            bool rest_blank = true;
            for (std::size_t k = li; k < lines.size(); ++k)
                if (!lines[k].empty()) rest_blank = false;
            if (rest_blank) break;
            throw ParseError("parse_babi: line " + std::to_string(li + 1) + ": empty line");
        }
        std::size_t pos = 0;
        int number = leading_number(line, pos);
        if (number <= 0)
            throw ParseError("parse_babi: line " + std::to_string(li + 1) + ": malformed line number");
        if (number == 1) {
            story.clear();
            ++story_index;
            prev_number = 1;
        } else if (number == prev_number + 1) {
            prev_number = number;
        } else {
            throw ParseError("parse_babi: line " + std::to_string(li + 1) + ": line number " +
                             std::to_string(number) + " does not follow " + std::to_string(prev_number));
        }

        const std::string body = line.substr(pos);
        if (body.find('\t') != std::string::npos) {
            std::vector<std::string> fields = split_on(body, '\t');
            if (fields.size() < 2 || fields[1].empty())
                throw ParseError("parse_babi: line " + std::to_string(li + 1) +
                                 ": question line without tab-separated answer");
            Example ex;
            ex.id = std::to_string(story_index) + ":" + std::to_string(number);
            ex.passage = story;
            ex.question = tokenize(fields[0], /*lowercase=*/true);
            ex.question.push_back(kPlaceholderToken);
            ex.answer.text = lowercased(fields[1]);
            // fields[2], the supporting fact ids, are discarded.
            ds.examples.push_back(std::move(ex));
        } else {
            story.push_back(tokenize(body, /*lowercase=*/true));
        }
    }
    ds.vocabulary = build_vocabulary(ds.examples);
    return ds;
}

// ---------------------------------------------------------------------------
// CBT parser

namespace {

constexpr const char* kCbtBlankMarker = "XXXXX";

Example parse_cbt_block(const std::vector<std::string>& block, int block_index) {
    const std::string where = "parse_cbt: block " + std::to_string(block_index);
    if (block.size() != 21) {
        // Count passage lines for the error message: all but a final
        // question line (identified by its tab).
        std::size_t passage_lines = block.size();
        if (!block.empty() && block.back().find('\t') != std::string::npos) --passage_lines;
        throw ParseError(where + ": expected 20 passage sentences, got " +
                         std::to_string(passage_lines));
    }
    Example ex;
    ex.id = "b" + std::to_string(block_index);
    for (int i = 0; i < 21; ++i) {
        const std::string& line = block[static_cast<std::size_t>(i)];
        std::size_t pos = 0;
        int number = leading_number(line, pos);
        if (number != i + 1)
            throw ParseError(where + ": expected line number " + std::to_string(i + 1));
        const std::string body = line.substr(pos);
        if (i < 20) {
            if (body.find('\t') != std::string::npos)
                throw ParseError(where + ": question line before sentence 21");
            ex.passage.push_back(tokenize(body, /*lowercase=*/false));
            continue;
        }
        std::vector<std::string> fields;
        for (const std::string& f : split_on(body, '\t'))
            if (!f.empty()) fields.push_back(f);
        if (fields.size() < 3)
            throw ParseError(where + ": question line needs question, answer and candidates");
        ex.question = tokenize(fields[0], /*lowercase=*/false);
        int blanks = 0;
        for (std::string& tok : ex.question) {
            if (tok == kCbtBlankMarker) {
                tok = kPlaceholderToken;
                ++blanks;
            }
        }
        if (blanks != 1)
            throw ParseError(where + ": expected exactly one blank marker, found " +
                             std::to_string(blanks));
        ex.answer.text = fields[1];
        for (const std::string& cand : split_on(fields[2], '|'))
            if (!cand.empty()) ex.candidates.push_back(cand);
        if (ex.candidates.size() != 10)
            throw ParseError(where + ": expected 10 candidates, got " +
                             std::to_string(ex.candidates.size()));
        if (std::find(ex.candidates.begin(), ex.candidates.end(), ex.answer.text) ==
            ex.candidates.end())
            throw ValidationError(where + ": answer '" + ex.answer.text +
                                  "' is not among the candidates");
    }
    return ex;
}

}  // namespace

Dataset parse_cbt(const std::string& text) {
    if (text.empty()) throw ParseError("parse_cbt: empty input");
    Dataset ds;
    ds.meta.source_family = "cbt";

    std::vector<std::string> block;
    int block_index = 0;
    for (const std::string& line : split_lines(text)) {
        if (line.empty()) {
            if (!block.empty()) {
                ds.examples.push_back(parse_cbt_block(block, ++block_index));
                block.clear();
            }
            continue;
        }
        block.push_back(line);
    }
    if (!block.empty()) ds.examples.push_back(parse_cbt_block(block, ++block_index));
    ds.vocabulary = build_vocabulary(ds.examples);
    return ds;
}

void assign_candidates_from_answers(Dataset& target, const Dataset& source) {
    std::vector<std::string> answers;
    for (const Example& ex : source.examples) answers.push_back(ex.answer.text);
    std::sort(answers.begin(), answers.end());
    answers.erase(std::unique(answers.begin(), answers.end()), answers.end());
    for (Example& ex : target.examples) ex.candidates = answers;
}

// ---------------------------------------------------------------------------
// Canonical JSON Lines

namespace {

json spec_to_json(const CorruptionSpec& spec) {
    json params = json::object();
    for (const auto& [key, value] : spec.params) {
        if (std::holds_alternative<std::int64_t>(value))
            params[key] = std::get<std::int64_t>(value);
        else if (std::holds_alternative<bool>(value))
            params[key] = std::get<bool>(value);
        else
            params[key] = std::get<std::string>(value);
    }
    return json{{"kind", spec.kind}, {"seed", spec.seed}, {"params", params}};
}

CorruptionSpec spec_from_json(const json& j) {
    CorruptionSpec spec;
    spec.kind = j.at("kind").get<std::string>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [key, value] : j.at("params").items()) {
        if (value.is_boolean())
            spec.params[key] = value.get<bool>();
        else if (value.is_number_integer())
            spec.params[key] = value.get<std::int64_t>();
        else
            spec.params[key] = value.get<std::string>();
    }
    return spec;
}

json example_to_json(const Example& ex) {
    json answer;
    if (ex.answer.is_span()) {
        const SpanAnswer& s = *ex.answer.span;
        answer = json{{"sent", s.sentence}, {"start", s.start}, {"end", s.end}, {"text", s.text}};
    } else {
        answer = json{{"text", ex.answer.text}};
    }
    return json{{"kind", "example"}, {"id", ex.id},         {"passage", ex.passage},
                {"question", ex.question}, {"candidates", ex.candidates}, {"answer", answer}};
}

Example example_from_json(const json& j, std::size_t line_no) {
    const std::string where = "canonical line " + std::to_string(line_no);
    try {
        Example ex;
        ex.id = j.at("id").get<std::string>();
        ex.passage = j.at("passage").get<std::vector<Sentence>>();
        ex.question = j.at("question").get<Sentence>();
        ex.candidates = j.at("candidates").get<std::vector<std::string>>();
        const json& answer = j.at("answer");
        ex.answer.text = answer.at("text").get<std::string>();
        if (answer.contains("sent")) {
            SpanAnswer span;
            span.sentence = answer.at("sent").get<int>();
            span.start = answer.at("start").get<int>();
            span.end = answer.at("end").get<int>();
            span.text = ex.answer.text;
            ex.answer.span = span;
        }
        return ex;
    } catch (const json::exception& e) {
        throw ParseError(where + ": missing or malformed field (" + e.what() + ")");
    }
}

}  // namespace

void write_canonical(const Dataset& dataset, std::ostream& out) {
    json history = json::array();
    for (const CorruptionSpec& spec : dataset.meta.corruption_history)
        history.push_back(spec_to_json(spec));
    json meta{{"kind", "meta"},
              {"source_family", dataset.meta.source_family},
              {"split", dataset.meta.split},
              {"corruption_history", history},
              {"vocab", dataset.vocabulary.corpus_tokens()}};
    out << meta.dump() << "\n";
    for (const Example& ex : dataset.examples) out << example_to_json(ex).dump() << "\n";
}

std::string canonical_string(const Dataset& dataset) {
    std::ostringstream out;
    write_canonical(dataset, out);
    return out.str();
}

Dataset read_canonical(std::istream& in) {
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool saw_meta = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("canonical line " + std::to_string(line_no) + ": invalid JSON (" +
                             e.what() + ")");
        }
        const std::string kind = j.value("kind", "");
        if (!saw_meta) {
            if (kind != "meta")
                throw ParseError("canonical line 1: expected the metadata record");
            try {
                ds.meta.source_family = j.at("source_family").get<std::string>();
                ds.meta.split = j.at("split").get<std::string>();
                for (const json& spec : j.at("corruption_history"))
                    ds.meta.corruption_history.push_back(spec_from_json(spec));
                for (const std::string& tok : j.at("vocab").get<std::vector<std::string>>())
                    ds.vocabulary.add(tok);
            } catch (const json::exception& e) {
                throw ParseError("canonical line 1: malformed metadata (" + std::string(e.what()) +
                                 ")");
            }
            saw_meta = true;
            continue;
        }
        if (kind != "example")
            throw ParseError("canonical line " + std::to_string(line_no) +
                             ": expected an example record");
        ds.examples.push_back(example_from_json(j, line_no));
    }
    if (!saw_meta) throw ParseError("canonical input: missing metadata record");
    validate(ds);
    return ds;
}

Dataset read_canonical_string(const std::string& text) {
    std::istringstream in(text);
    return read_canonical(in);
}

Dataset load_canonical_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_canonical(in);
}

void save_canonical_file(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    write_canonical(dataset, out);
    if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Invariant checks

namespace {

std::string join_tokens(const Sentence& sent, int start, int end) {
    std::string out;
    for (int i = start; i < end; ++i) {
        if (i > start) out.push_back(' ');
        out += sent[static_cast<std::size_t>(i)];
    }
    return out;
}

}  // namespace

void validate(const Dataset& dataset) {
    bool passage_reshaped = false;
    for (const CorruptionSpec& spec : dataset.meta.corruption_history)
        if (spec.kind == "truncate_passage") passage_reshaped = true;

    for (const Example& ex : dataset.examples) {
        const std::string where = "example '" + ex.id + "'";
        int placeholders = 0;
        for (const std::string& tok : ex.question)
            if (tok == kPlaceholderToken) ++placeholders;
        if (ex.answer.is_span()) {
            if (placeholders != 0)
                throw ValidationError(where + ": span example must not contain a placeholder");
            const SpanAnswer& s = *ex.answer.span;
            if (s.sentence < 0 || static_cast<std::size_t>(s.sentence) >= ex.passage.size())
                throw ValidationError(where + ": span sentence index out of range");
            const Sentence& sent = ex.passage[static_cast<std::size_t>(s.sentence)];
            if (s.start < 0 || s.end <= s.start ||
                static_cast<std::size_t>(s.end) > sent.size())
                throw ValidationError(where + ": span token range out of range");
            if (join_tokens(sent, s.start, s.end) != s.text)
                throw ValidationError(where + ": span does not reproduce the answer text");
        } else {
            if (placeholders != 1)
                throw ValidationError(where + ": cloze question must contain exactly one placeholder");
            if (!ex.candidates.empty() &&
                std::find(ex.candidates.begin(), ex.candidates.end(), ex.answer.text) ==
                    ex.candidates.end())
                throw ValidationError(where + ": answer '" + ex.answer.text +
                                      "' is not among the candidates");
        }
        if (dataset.meta.source_family == "cbt") {
            if (!passage_reshaped && ex.passage.size() != 20)
                throw ValidationError(where + ": CBT passage must have 20 sentences");
            if (ex.candidates.size() != 10)
                throw ValidationError(where + ": CBT example must have 10 candidates");
        }
    }
}

}  // namespace rcdiag
