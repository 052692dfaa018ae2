#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rcdiag/corpus.hpp"
#include "rcdiag/memnet.hpp"

namespace rcdiag {

enum class Optimizer { sgd, adam };

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 100;
    int patience = 10;        // epochs without val improvement before stop
    double grad_clip = 10.0;  // global L2 norm cap
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void check() const;
};

// Flat key=value text (one pair per line, '#' comments). Used for train
// configs and, with section prefixes, for pipeline plans.
std::map<std::string, std::string> parse_kv(const std::string& text);
std::map<std::string, std::string> load_kv_file(const std::string& path);

// Reads the keys learning_rate, batch_size, max_epochs, patience,
// grad_clip, seed, optimizer. Unknown keys under the same prefix are an
// error so typos do not silently fall back to defaults.
TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv,
                                 const std::string& prefix = "");

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct History {
    std::vector<EpochStats> epochs;
    // Echo of every run choice, so the CSV is self-describing.
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::string plan_hash;
    int best_epoch = 0;

    double best_val_accuracy() const;
    std::string to_csv() const;
};

struct TrainedModel {
    ModelParams params;  // the best-validation parameters
    History history;
};

// Deterministic mini-batch training with validation-based early stopping.
// Initialization and epoch shuffling derive from config.seed; identical
// inputs and config reproduce an identical History.
TrainedModel train(const Dataset& train_set, const Dataset& val_set, const ModelHyper& hyper,
                   const TrainConfig& config, const std::string& plan_hash = "");

// Fraction of examples whose prediction equals the gold answer, with
// tokens resolved through `vocab` (the training-time vocabulary).
double evaluate(const ModelParams& params, const ModelHyper& hyper, const Vocabulary& vocab,
                const Dataset& dataset);

// Same metric over pre-encoded examples.
double evaluate_encoded(const ModelParams& params, const ModelHyper& hyper,
                        const std::vector<EncodedExample>& examples);

// Scales all gradients so the global L2 norm is at most `cap`. Returns the
// pre-clip norm.
double clip_gradients(Gradients& grads, double cap);

}  // namespace rcdiag
