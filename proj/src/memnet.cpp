#include "rcdiag/memnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rcdiag/rng.hpp"

namespace rcdiag {

using json = nlohmann::json;

std::string to_string(MemoryMode mode) {
    switch (mode) {
        case MemoryMode::bow_passage: return "bow_passage";
        case MemoryMode::window: return "window";
        case MemoryMode::sentence: return "sentence";
    }
    throw Error("unreachable memory mode");
}

MemoryMode memory_mode_from_string(const std::string& name) {
    if (name == "bow_passage") return MemoryMode::bow_passage;
    if (name == "window") return MemoryMode::window;
    if (name == "sentence") return MemoryMode::sentence;
    throw UsageError("unknown memory mode '" + name + "'");
}

ModelHyper ModelHyper::defaults_for(MemoryMode mode) {
    ModelHyper hyper;
    hyper.memory_mode = mode;
    hyper.temporal_tokens = (mode == MemoryMode::bow_passage);
    return hyper;
}

void ModelHyper::check() const {
    if (dim < 1) throw UsageError("ModelHyper: dim must be >= 1");
    if (hops < 1) throw UsageError("ModelHyper: hops must be >= 1");
    if (window_size < 1 || window_size % 2 == 0)
        throw UsageError("ModelHyper: window_size must be odd and >= 1");
    if (max_memories < 1) throw UsageError("ModelHyper: max_memories must be >= 1");
}

int time_token_id(int vocab_size, int distance_from_end) {
    return vocab_size + distance_from_end - 1;
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

TokenCounts counts_from_ids(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    TokenCounts counts;
    for (int id : ids) {
        if (!counts.empty() && counts.back().first == id)
            counts.back().second += 1.0;
        else
            counts.emplace_back(id, 1.0);
    }
    return counts;
}

TokenCounts sentence_counts(const Sentence& sent, const Vocabulary& vocab) {
    std::vector<int> ids;
    ids.reserve(sent.size());
    for (const std::string& tok : sent) ids.push_back(vocab.id(tok));
    return counts_from_ids(std::move(ids));
}

void add_time_token(TokenCounts& counts, int vocab_size, int distance) {
    counts.emplace_back(time_token_id(vocab_size, distance), 1.0);
}

std::vector<std::string> candidate_tokens(const std::string& candidate) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : candidate + " ") {
        if (c == ' ') {
            if (!cur.empty()) toks.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return toks;
}

}  // namespace

MemoryEncoding encode_memories(const Example& example, const ModelHyper& hyper,
                               const Vocabulary& vocab) {
    hyper.check();
    const int vocab_size = static_cast<int>(vocab.size());
    MemoryEncoding enc;

    if (hyper.memory_mode == MemoryMode::window) {
        if (example.candidates.empty())
            throw EncodingError("encode_memories: window mode needs candidates (example '" +
                                example.id + "')");
        // Distinct candidates, in list order.
        std::vector<std::string> cands;
        for (const std::string& c : example.candidates)
            if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);

        struct Slot {
            std::size_t sentence;
            std::size_t start;
            std::size_t len;
            int candidate_id;
        };
        std::vector<Slot> slots;
        for (const std::string& cand : cands) {
            const std::vector<std::string> toks = candidate_tokens(cand);
            if (toks.empty()) continue;
            const int cand_id = vocab.id(cand);
            for (std::size_t s = 0; s < example.passage.size(); ++s) {
                const Sentence& sent = example.passage[s];
                if (sent.size() < toks.size()) continue;
                for (std::size_t start = 0; start + toks.size() <= sent.size(); ++start) {
                    bool match = true;
                    for (std::size_t k = 0; k < toks.size(); ++k)
                        if (sent[start + k] != toks[k]) match = false;
                    if (match) slots.push_back({s, start, toks.size(), cand_id});
                }
            }
        }
        std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
            if (a.sentence != b.sentence) return a.sentence < b.sentence;
            return a.start < b.start;
        });
        if (slots.size() > static_cast<std::size_t>(hyper.max_memories))
            slots.erase(slots.begin(),
                        slots.end() - static_cast<std::ptrdiff_t>(hyper.max_memories));

        const std::size_t half = static_cast<std::size_t>((hyper.window_size - 1) / 2);
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const Slot& slot = slots[i];
            const Sentence& sent = example.passage[slot.sentence];
            const std::size_t center = slot.start + (slot.len - 1) / 2;
            const std::size_t lo = center >= half ? center - half : 0;
            const std::size_t hi = std::min(sent.size(), center + half + 1);
            std::vector<int> ids;
            for (std::size_t t = lo; t < hi; ++t) ids.push_back(vocab.id(sent[t]));
            TokenCounts key = counts_from_ids(std::move(ids));
            if (hyper.temporal_tokens)
                add_time_token(key, vocab_size, static_cast<int>(slots.size() - i));
            enc.keys.push_back(std::move(key));
            enc.values.push_back({{slot.candidate_id, 1.0}});
            enc.slot_candidate.push_back(slot.candidate_id);
        }
        return enc;
    }

    // bow_passage / sentence: one slot per sentence, keep the most recent
    // max_memories sentences.
    std::size_t first = 0;
    if (example.passage.size() > static_cast<std::size_t>(hyper.max_memories))
        first = example.passage.size() - static_cast<std::size_t>(hyper.max_memories);
    const std::size_t n = example.passage.size() - first;
    for (std::size_t i = 0; i < n; ++i) {
        TokenCounts value = sentence_counts(example.passage[first + i], vocab);
        TokenCounts key = value;
        if (hyper.temporal_tokens)
            add_time_token(key, vocab_size, static_cast<int>(n - i));
        enc.keys.push_back(std::move(key));
        enc.values.push_back(std::move(value));
    }
    return enc;
}

EncodedExample encode_example(const Example& example, const ModelHyper& hyper,
                              const Vocabulary& vocab) {
    EncodedExample enc;
    enc.id = example.id;
    enc.memories = encode_memories(example, hyper, vocab);
    enc.question = sentence_counts(example.question, vocab);
    std::vector<int> cand_ids;
    for (const std::string& cand : example.candidates) cand_ids.push_back(vocab.id(cand));
    std::sort(cand_ids.begin(), cand_ids.end());
    cand_ids.erase(std::unique(cand_ids.begin(), cand_ids.end()), cand_ids.end());
    enc.candidates = std::move(cand_ids);
    enc.answer_id = vocab.id(example.answer.text);
    return enc;
}

// ---------------------------------------------------------------------------
// Parameters

Gradients Gradients::zeros_like(const ModelParams& params) {
    Gradients g;
    g.input_embedding = Matrix(params.input_embedding.rows(), params.input_embedding.cols());
    g.output_embedding = Matrix(params.output_embedding.rows(), params.output_embedding.cols());
    for (const Matrix& r : params.hop_transforms)
        g.hop_transforms.emplace_back(r.rows(), r.cols());
    return g;
}

ModelParams init_params(const ModelHyper& hyper, int vocab_size, std::uint64_t seed) {
    hyper.check();
    ModelParams params;
    params.vocab_size = vocab_size;
    const int extended = vocab_size + hyper.max_memories;
    params.input_embedding = Matrix(hyper.dim, extended);
    params.output_embedding = Matrix(hyper.dim, extended);
    Rng rng(seed);
    auto fill_gaussian = [&](Matrix& m) {
        for (double& v : m.raw()) v = 0.1 * rng.next_gaussian();
    };
    fill_gaussian(params.input_embedding);
    fill_gaussian(params.output_embedding);
    for (int h = 0; h < hyper.hops; ++h) {
        params.hop_transforms.emplace_back(hyper.dim, hyper.dim);
        fill_gaussian(params.hop_transforms.back());
    }
    for (int r = 0; r < hyper.dim; ++r) {
        params.input_embedding.at(r, kPadId) = 0.0;
        params.output_embedding.at(r, kPadId) = 0.0;
    }
    return params;
}

// ---------------------------------------------------------------------------
// Forward / backward

void softmax_inplace(std::vector<double>& scores) {
    double max = scores[0];
    for (double s : scores) max = std::max(max, s);
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - max);
        sum += s;
    }
    for (double& s : scores) s /= sum;
}

namespace {

// dest += scale * M[:, counts]  (embedding lookup-and-sum)
void embed_into(std::vector<double>& dest, const Matrix& m, const TokenCounts& counts,
                double scale = 1.0) {
    const int dim = m.rows();
    for (const auto& [id, count] : counts) {
        const double* column = m.col(id);
        const double w = scale * count;
        for (int r = 0; r < dim; ++r) dest[static_cast<std::size_t>(r)] += w * column[r];
    }
}

// grad[:, counts] += scale * vec  (transpose of embed_into)
void scatter_into(Matrix& grad, const TokenCounts& counts, const std::vector<double>& vec,
                  double scale) {
    const int dim = grad.rows();
    for (const auto& [id, count] : counts) {
        double* column = grad.col(id);
        const double w = scale * count;
        for (int r = 0; r < dim; ++r) column[r] += w * vec[static_cast<std::size_t>(r)];
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

struct Trace {
    std::vector<std::vector<double>> embedded_keys;
    std::vector<std::vector<double>> embedded_values;
    std::vector<std::vector<double>> queries;     // q(1)..q(H+1)
    std::vector<std::vector<double>> pre_queries; // u(h) = q(h) + o(h)
    std::vector<std::vector<double>> attention;
    std::vector<std::vector<double>> scores;
    std::vector<double> candidate_scores;
    std::vector<double> probs;
};

Trace run_forward(const ModelParams& params, const ModelHyper& hyper,
                  const MemoryEncoding& memories, const TokenCounts& question,
                  const std::vector<int>& candidates) {
    if (memories.keys.empty())
        throw EncodingError("forward: example has no memory slots");
    if (candidates.empty()) throw EncodingError("forward: empty candidate set");

    const int dim = hyper.dim;
    const std::size_t slots = memories.keys.size();
    Trace t;

    t.embedded_keys.assign(slots, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    t.embedded_values.assign(slots, std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    for (std::size_t i = 0; i < slots; ++i) {
        embed_into(t.embedded_keys[i], params.input_embedding, memories.keys[i]);
        embed_into(t.embedded_values[i], params.input_embedding, memories.values[i]);
    }

    std::vector<double> q(static_cast<std::size_t>(dim), 0.0);
    embed_into(q, params.input_embedding, question);
    t.queries.push_back(q);

    for (int h = 0; h < hyper.hops; ++h) {
        std::vector<double> scores(slots);
        for (std::size_t i = 0; i < slots; ++i) scores[i] = dot(q, t.embedded_keys[i]);
        std::vector<double> attention = scores;
        softmax_inplace(attention);

        std::vector<double> output(static_cast<std::size_t>(dim), 0.0);
        for (std::size_t i = 0; i < slots; ++i)
            for (int r = 0; r < dim; ++r)
                output[static_cast<std::size_t>(r)] +=
                    attention[i] * t.embedded_values[i][static_cast<std::size_t>(r)];

        std::vector<double> u(static_cast<std::size_t>(dim));
        for (int r = 0; r < dim; ++r)
            u[static_cast<std::size_t>(r)] =
                q[static_cast<std::size_t>(r)] + output[static_cast<std::size_t>(r)];

        const Matrix& transform = params.hop_transforms[static_cast<std::size_t>(h)];
        std::vector<double> next(static_cast<std::size_t>(dim), 0.0);
        for (int c = 0; c < dim; ++c) {
            const double* column = transform.col(c);
            const double uc = u[static_cast<std::size_t>(c)];
            for (int r = 0; r < dim; ++r) next[static_cast<std::size_t>(r)] += column[r] * uc;
        }

        if (!all_finite(next) || !all_finite(attention))
            throw NumericError("forward: non-finite value at hop " + std::to_string(h + 1));

        t.scores.push_back(std::move(scores));
        t.attention.push_back(std::move(attention));
        t.pre_queries.push_back(std::move(u));
        t.queries.push_back(next);
        q = std::move(next);
    }

    t.candidate_scores.resize(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double* column = params.output_embedding.col(candidates[c]);
        double acc = 0.0;
        for (int r = 0; r < dim; ++r) acc += q[static_cast<std::size_t>(r)] * column[r];
        t.candidate_scores[c] = acc;
    }
    if (!all_finite(t.candidate_scores))
        throw NumericError("forward: non-finite candidate score after hop " +
                           std::to_string(hyper.hops));
    t.probs = t.candidate_scores;
    softmax_inplace(t.probs);
    return t;
}

}  // namespace

ForwardResult forward(const ModelParams& params, const ModelHyper& hyper,
                      const MemoryEncoding& memories, const TokenCounts& question,
                      const std::vector<int>& candidates) {
    Trace t = run_forward(params, hyper, memories, question, candidates);
    ForwardResult out;
    out.probs = std::move(t.probs);
    out.candidate_scores = std::move(t.candidate_scores);
    out.attention = std::move(t.attention);
    out.scores = std::move(t.scores);
    out.queries = std::move(t.queries);
    return out;
}

std::pair<double, Gradients> loss_and_gradients(const ModelParams& params,
                                                const ModelHyper& hyper,
                                                const std::vector<const EncodedExample*>& batch) {
    if (batch.empty()) throw TrainError("loss_and_gradients: empty batch");
    const int dim = hyper.dim;
    Gradients grads = Gradients::zeros_like(params);
    double loss_sum = 0.0;

    for (const EncodedExample* item : batch) {
        const auto answer_it =
            std::find(item->candidates.begin(), item->candidates.end(), item->answer_id);
        if (answer_it == item->candidates.end())
            throw TrainError("loss_and_gradients: answer of example '" + item->id +
                             "' is not in its candidate set");
        const std::size_t answer_pos =
            static_cast<std::size_t>(answer_it - item->candidates.begin());

        Trace t = run_forward(params, hyper, item->memories, item->question, item->candidates);

        // Stable -log p_answer via log-sum-exp.
        double zmax = t.candidate_scores[0];
        for (double z : t.candidate_scores) zmax = std::max(zmax, z);
        double lse = 0.0;
        for (double z : t.candidate_scores) lse += std::exp(z - zmax);
        loss_sum += std::log(lse) - (t.candidate_scores[answer_pos] - zmax);

        // d loss / d score_c = p_c - [c == answer]
        const std::vector<double>& q_last = t.queries.back();
        std::vector<double> dq(static_cast<std::size_t>(dim), 0.0);
        for (std::size_t c = 0; c < item->candidates.size(); ++c) {
            const double dz = t.probs[c] - (c == answer_pos ? 1.0 : 0.0);
            const int cand = item->candidates[c];
            double* gcol = grads.output_embedding.col(cand);
            const double* bcol = params.output_embedding.col(cand);
            for (int r = 0; r < dim; ++r) {
                gcol[r] += dz * q_last[static_cast<std::size_t>(r)];
                dq[static_cast<std::size_t>(r)] += dz * bcol[r];
            }
        }

        const std::size_t slots = item->memories.keys.size();
        for (int h = hyper.hops - 1; h >= 0; --h) {
            const Matrix& transform = params.hop_transforms[static_cast<std::size_t>(h)];
            Matrix& dtransform = grads.hop_transforms[static_cast<std::size_t>(h)];
            const std::vector<double>& u = t.pre_queries[static_cast<std::size_t>(h)];

            // q(h+1) = R_h u  =>  dR_h += dq u^T, du = R_h^T dq
            std::vector<double> du(static_cast<std::size_t>(dim), 0.0);
            for (int c = 0; c < dim; ++c) {
                double* gcol = dtransform.col(c);
                const double* column = transform.col(c);
                const double uc = u[static_cast<std::size_t>(c)];
                double acc = 0.0;
                for (int r = 0; r < dim; ++r) {
                    gcol[r] += dq[static_cast<std::size_t>(r)] * uc;
                    acc += column[r] * dq[static_cast<std::size_t>(r)];
                }
                du[static_cast<std::size_t>(c)] = acc;
            }

            // u = q(h) + o(h); o = sum_i alpha_i av_i
            const std::vector<double>& alpha = t.attention[static_cast<std::size_t>(h)];
            std::vector<double> dalpha(slots, 0.0);
            for (std::size_t i = 0; i < slots; ++i) {
                dalpha[i] = dot(du, t.embedded_values[i]);
                scatter_into(grads.input_embedding, item->memories.values[i], du, alpha[i]);
            }

            // softmax backward
            double mix = 0.0;
            for (std::size_t i = 0; i < slots; ++i) mix += alpha[i] * dalpha[i];

            // s_i = <q(h), ak_i>
            std::vector<double> dq_h = du;  // contribution through u = q + o
            const std::vector<double>& q_h = t.queries[static_cast<std::size_t>(h)];
            for (std::size_t i = 0; i < slots; ++i) {
                const double ds = alpha[i] * (dalpha[i] - mix);
                for (int r = 0; r < dim; ++r)
                    dq_h[static_cast<std::size_t>(r)] +=
                        ds * t.embedded_keys[i][static_cast<std::size_t>(r)];
                scatter_into(grads.input_embedding, item->memories.keys[i], q_h, ds);
            }
            dq = std::move(dq_h);
        }

        // q(1) = A phi(question)
        scatter_into(grads.input_embedding, item->question, dq, 1.0);
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grads.input_embedding.raw()) g *= inv;
    for (double& g : grads.output_embedding.raw()) g *= inv;
    for (Matrix& m : grads.hop_transforms)
        for (double& g : m.raw()) g *= inv;

    // PAD never receives updates.
    for (int r = 0; r < dim; ++r) {
        grads.input_embedding.at(r, kPadId) = 0.0;
        grads.output_embedding.at(r, kPadId) = 0.0;
    }
    return {loss_sum * inv, std::move(grads)};
}

int predict(const ModelParams& params, const ModelHyper& hyper, const MemoryEncoding& memories,
            const TokenCounts& question, const std::vector<int>& candidates) {
    const ForwardResult result = forward(params, hyper, memories, question, candidates);
    std::size_t best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c) {
        if (result.probs[c] > result.probs[best] ||
            (result.probs[c] == result.probs[best] && candidates[c] < candidates[best]))
            best = c;
    }
    return candidates[best];
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json matrix_to_json(const Matrix& m) {
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(m.rows()) * static_cast<std::size_t>(m.cols()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) row_major.push_back(m.at(r, c));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", row_major}};
}

Matrix matrix_from_json(const json& j, const std::string& name, int want_rows, int want_cols) {
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    if (rows != want_rows || cols != want_cols)
        throw ValidationError("checkpoint: " + name + " is " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", expected " + std::to_string(want_rows) +
                              "x" + std::to_string(want_cols));
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw ValidationError("checkpoint: " + name + " data length mismatch");
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m.at(r, c) = data[k++];
    return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelHyper& hyper, const Vocabulary& vocab,
                     const std::string& plan_hash) {
    json j{{"format", "rcdiag-checkpoint-v1"},
           {"dim", hyper.dim},
           {"hops", hyper.hops},
           {"memory_mode", to_string(hyper.memory_mode)},
           {"window_size", hyper.window_size},
           {"max_memories", hyper.max_memories},
           {"temporal_tokens", hyper.temporal_tokens},
           {"vocab", vocab.corpus_tokens()},
           {"plan_hash", plan_hash},
           {"input_embedding", matrix_to_json(params.input_embedding)},
           {"output_embedding", matrix_to_json(params.output_embedding)}};
    json hop_list = json::array();
    for (const Matrix& m : params.hop_transforms) hop_list.push_back(matrix_to_json(m));
    j["hop_transforms"] = hop_list;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump() << "\n";
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path + ": invalid JSON (" + e.what() + ")");
    }
    try {
        Checkpoint ckpt;
        ckpt.hyper.dim = j.at("dim").get<int>();
        ckpt.hyper.hops = j.at("hops").get<int>();
        ckpt.hyper.memory_mode = memory_mode_from_string(j.at("memory_mode").get<std::string>());
        ckpt.hyper.window_size = j.at("window_size").get<int>();
        ckpt.hyper.max_memories = j.at("max_memories").get<int>();
        ckpt.hyper.temporal_tokens = j.at("temporal_tokens").get<bool>();
        ckpt.hyper.check();
        ckpt.plan_hash = j.value("plan_hash", "");
        for (const std::string& tok : j.at("vocab").get<std::vector<std::string>>())
            ckpt.vocab.add(tok);
        const int vocab_size = static_cast<int>(ckpt.vocab.size());
        const int extended = vocab_size + ckpt.hyper.max_memories;
        ckpt.params.vocab_size = vocab_size;
        ckpt.params.input_embedding =
            matrix_from_json(j.at("input_embedding"), "input_embedding", ckpt.hyper.dim, extended);
        ckpt.params.output_embedding = matrix_from_json(j.at("output_embedding"),
                                                        "output_embedding", ckpt.hyper.dim, extended);
        const json& hop_list = j.at("hop_transforms");
        if (static_cast<int>(hop_list.size()) != ckpt.hyper.hops)
            throw ValidationError("checkpoint: hop transform count does not match hops");
        for (int h = 0; h < ckpt.hyper.hops; ++h)
            ckpt.params.hop_transforms.push_back(matrix_from_json(
                hop_list[static_cast<std::size_t>(h)], "hop_transforms[" + std::to_string(h) + "]",
                ckpt.hyper.dim, ckpt.hyper.dim));
        return ckpt;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint " + path + ": missing field (" + std::string(e.what()) + ")");
    }
}

}  // namespace rcdiag
