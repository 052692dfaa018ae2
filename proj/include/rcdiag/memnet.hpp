#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcdiag/corpus.hpp"

namespace rcdiag {

enum class MemoryMode { bow_passage, window, sentence };

std::string to_string(MemoryMode mode);
MemoryMode memory_mode_from_string(const std::string& name);

struct ModelHyper {
    int dim = 128;
    int hops = 3;
    MemoryMode memory_mode = MemoryMode::bow_passage;
    int window_size = 5;      // window mode: tokens per key, odd
    int max_memories = 50;    // slot cap, most recent kept
    bool temporal_tokens = true;

    // Defaults per mode: temporal tokens on for passage BoW over bAbI-style
    // stories (orderless BoW cannot answer "where is X now"), off for
    // window and sentence memories.
    static ModelHyper defaults_for(MemoryMode mode);

    void check() const;
};

// Sparse token-count vector: (token id, count), ids strictly increasing.
using TokenCounts = std::vector<std::pair<int, double>>;

// Memory slots for one example. In window mode each value is the single
// candidate token of its slot, recorded again in `slot_candidate`.
struct MemoryEncoding {
    std::vector<TokenCounts> keys;
    std::vector<TokenCounts> values;
    std::vector<int> slot_candidate;  // window mode only, else empty
};

// Synthetic time tokens live above the corpus vocabulary: the id of the
// token marking "distance d from the passage end" (d = 1 for the most
// recent slot) is vocab_size + d - 1.
int time_token_id(int vocab_size, int distance_from_end);

// Column-major dense matrix; columns are embedding vectors, so per-token
// access touches contiguous memory.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double* col(int j) { return data_.data() + static_cast<std::size_t>(j) * rows_; }
    const double* col(int j) const { return data_.data() + static_cast<std::size_t>(j) * rows_; }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(c) * rows_ + r]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(c) * rows_ + r]; }

    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

struct ModelParams {
    // Embedding matrices are dim x (vocab_size + max_memories); the tail
    // columns hold time-token embeddings. Column 0 (PAD) stays zero.
    Matrix input_embedding;
    Matrix output_embedding;
    std::vector<Matrix> hop_transforms;  // hops matrices, dim x dim
    int vocab_size = 0;

    int extended_size() const { return input_embedding.cols(); }
};

// Gradient structure congruent to ModelParams.
struct Gradients {
    Matrix input_embedding;
    Matrix output_embedding;
    std::vector<Matrix> hop_transforms;

    static Gradients zeros_like(const ModelParams& params);
};

// Zero-mean Gaussian init (stddev 0.1) from the toolkit RNG; PAD columns
// zeroed.
ModelParams init_params(const ModelHyper& hyper, int vocab_size, std::uint64_t seed);

// One example, encoded against a fixed vocabulary, ready for the model.
struct EncodedExample {
    std::string id;
    MemoryEncoding memories;
    TokenCounts question;
    std::vector<int> candidates;  // sorted unique vocabulary ids
    int answer_id = kUnkId;
};

MemoryEncoding encode_memories(const Example& example, const ModelHyper& hyper,
                               const Vocabulary& vocab);
EncodedExample encode_example(const Example& example, const ModelHyper& hyper,
                              const Vocabulary& vocab);

struct ForwardResult {
    std::vector<double> probs;             // aligned with the candidate list
    std::vector<double> candidate_scores;  // pre-softmax
    std::vector<std::vector<double>> attention;  // per hop, per slot
    std::vector<std::vector<double>> scores;     // per hop, pre-softmax
    std::vector<std::vector<double>> queries;    // q(1) .. q(hops+1)
};

// Multi-hop key-value attention:
//   q(1)   = A phi(question)
//   alpha  = softmax_i <q(h), A phi(key_i)>
//   o(h)   = sum_i alpha_i A phi(value_i)
//   q(h+1) = R_h (q(h) + o(h))
//   score_c = <q(H+1), B e_c>, p = softmax over the candidate set
// where A is the input embedding, B the output embedding and R_h the
// per-hop transforms.
ForwardResult forward(const ModelParams& params, const ModelHyper& hyper,
                      const MemoryEncoding& memories, const TokenCounts& question,
                      const std::vector<int>& candidates);

// Mean cross-entropy over the batch and its exact gradients.
std::pair<double, Gradients> loss_and_gradients(const ModelParams& params,
                                                const ModelHyper& hyper,
                                                const std::vector<const EncodedExample*>& batch);

// Argmax over candidate probabilities; ties go to the smallest candidate id.
int predict(const ModelParams& params, const ModelHyper& hyper, const MemoryEncoding& memories,
            const TokenCounts& question, const std::vector<int>& candidates);

// Numerically stable softmax (max subtraction), in place.
void softmax_inplace(std::vector<double>& scores);

// Checkpoint: JSON with hyperparameters, the vocabulary and all matrices in
// row-major order plus explicit dimensions. Loading validates dimensions.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelHyper& hyper, const Vocabulary& vocab,
                     const std::string& plan_hash = "");
struct Checkpoint {
    ModelParams params;
    ModelHyper hyper;
    Vocabulary vocab;
    std::string plan_hash;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rcdiag
