#include "rcdiag/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rcdiag/rng.hpp"

namespace rcdiag {

std::string to_string(Optimizer opt) {
    return opt == Optimizer::sgd ? "sgd" : "adam";
}

Optimizer optimizer_from_string(const std::string& name) {
    if (name == "sgd") return Optimizer::sgd;
    if (name == "adam" || name == "adaptive") return Optimizer::adam;
    throw UsageError("unknown optimizer '" + name + "'");
}

void TrainConfig::check() const {
    if (!(learning_rate > 0)) throw UsageError("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be >= 1");
    if (max_epochs < 1) throw UsageError("TrainConfig: max_epochs must be >= 1");
    if (patience < 1) throw UsageError("TrainConfig: patience must be >= 1");
    if (!(grad_clip > 0)) throw UsageError("TrainConfig: grad_clip must be > 0");
}

// ---------------------------------------------------------------------------
// key=value files

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const std::size_t a = s.find_first_not_of(ws);
        if (a == std::string::npos) return std::string();
        const std::size_t b = s.find_last_not_of(ws);
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw UsageError("config line " + std::to_string(line_no) + ": empty key");
        if (kv.count(key))
            throw UsageError("config line " + std::to_string(line_no) + ": duplicate key '" +
                             key + "'");
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> load_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_kv(buffer.str());
}

namespace {

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': '" + value + "' is not a number");
    }
}

long long to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': '" + value + "' is not an integer");
    }
}

}  // namespace

TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv,
                                 const std::string& prefix) {
    TrainConfig config;
    for (const auto& [full_key, value] : kv) {
        if (full_key.rfind(prefix, 0) != 0) continue;
        const std::string key = full_key.substr(prefix.size());
        if (key == "learning_rate")
            config.learning_rate = to_double(full_key, value);
        else if (key == "batch_size")
            config.batch_size = static_cast<int>(to_int(full_key, value));
        else if (key == "max_epochs")
            config.max_epochs = static_cast<int>(to_int(full_key, value));
        else if (key == "patience")
            config.patience = static_cast<int>(to_int(full_key, value));
        else if (key == "grad_clip")
            config.grad_clip = to_double(full_key, value);
        else if (key == "seed")
            config.seed = static_cast<std::uint64_t>(to_int(full_key, value));
        else if (key == "optimizer")
            config.optimizer = optimizer_from_string(value);
        else
            throw UsageError("unknown train config key '" + full_key + "'");
    }
    config.check();
    return config;
}

// ---------------------------------------------------------------------------
// History

double History::best_val_accuracy() const {
    double best = 0.0;
    for (const EpochStats& e : epochs) best = std::max(best, e.val_accuracy);
    return best;
}

std::string History::to_csv() const {
    std::ostringstream out;
    if (!plan_hash.empty()) out << "# plan " << plan_hash << "\n";
    for (const auto& [key, value] : config_echo) out << "# config " << key << "=" << value << "\n";
    out << "# best_epoch " << best_epoch << "\n";
    out << "epoch,train_loss,val_accuracy\n";
    char buf[96];
    for (const EpochStats& e : epochs) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.6f\n", e.epoch, e.train_loss, e.val_accuracy);
        out << buf;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Optimizer step

double clip_gradients(Gradients& grads, double cap) {
    double sq = 0.0;
    auto add = [&](const Matrix& m) {
        for (double g : m.raw()) sq += g * g;
    };
    add(grads.input_embedding);
    add(grads.output_embedding);
    for (const Matrix& m : grads.hop_transforms) add(m);
    const double norm = std::sqrt(sq);
    if (norm > cap && norm > 0.0) {
        const double scale = cap / norm;
        for (double& g : grads.input_embedding.raw()) g *= scale;
        for (double& g : grads.output_embedding.raw()) g *= scale;
        for (Matrix& m : grads.hop_transforms)
            for (double& g : m.raw()) g *= scale;
    }
    return norm;
}

namespace {

struct AdamState {
    Gradients first_moment;
    Gradients second_moment;
    long step = 0;
};

void adam_update_block(std::vector<double>& param, const std::vector<double>& grad,
                       std::vector<double>& m, std::vector<double>& v,
                       const TrainConfig& config, double bias1, double bias2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        param[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
    }
}

void sgd_update_block(std::vector<double>& param, const std::vector<double>& grad,
                      const TrainConfig& config) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= config.learning_rate * grad[i];
}

void apply_update(ModelParams& params, const Gradients& grads, AdamState& state,
                  const TrainConfig& config) {
    if (config.optimizer == Optimizer::sgd) {
        sgd_update_block(params.input_embedding.raw(), grads.input_embedding.raw(), config);
        sgd_update_block(params.output_embedding.raw(), grads.output_embedding.raw(), config);
        for (std::size_t h = 0; h < params.hop_transforms.size(); ++h)
            sgd_update_block(params.hop_transforms[h].raw(), grads.hop_transforms[h].raw(),
                             config);
        return;
    }
    ++state.step;
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    adam_update_block(params.input_embedding.raw(), grads.input_embedding.raw(),
                      state.first_moment.input_embedding.raw(),
                      state.second_moment.input_embedding.raw(), config, bias1, bias2);
    adam_update_block(params.output_embedding.raw(), grads.output_embedding.raw(),
                      state.first_moment.output_embedding.raw(),
                      state.second_moment.output_embedding.raw(), config, bias1, bias2);
    for (std::size_t h = 0; h < params.hop_transforms.size(); ++h)
        adam_update_block(params.hop_transforms[h].raw(), grads.hop_transforms[h].raw(),
                          state.first_moment.hop_transforms[h].raw(),
                          state.second_moment.hop_transforms[h].raw(), config, bias1, bias2);
}

std::vector<std::pair<std::string, std::string>> echo_config(const ModelHyper& hyper,
                                                             const TrainConfig& config) {
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%g", v);
        return std::string(buf);
    };
    return {
        {"dim", std::to_string(hyper.dim)},
        {"hops", std::to_string(hyper.hops)},
        {"memory_mode", to_string(hyper.memory_mode)},
        {"window_size", std::to_string(hyper.window_size)},
        {"max_memories", std::to_string(hyper.max_memories)},
        {"temporal_tokens", hyper.temporal_tokens ? "true" : "false"},
        {"learning_rate", fmt(config.learning_rate)},
        {"batch_size", std::to_string(config.batch_size)},
        {"max_epochs", std::to_string(config.max_epochs)},
        {"patience", std::to_string(config.patience)},
        {"grad_clip", fmt(config.grad_clip)},
        {"seed", std::to_string(config.seed)},
        {"optimizer", to_string(config.optimizer)},
    };
}

}  // namespace

// ---------------------------------------------------------------------------
// Training loop

TrainedModel train(const Dataset& train_set, const Dataset& val_set, const ModelHyper& hyper,
                   const TrainConfig& config, const std::string& plan_hash) {
    hyper.check();
    config.check();
    if (train_set.examples.empty()) throw TrainError("train: empty training set");
    if (val_set.examples.empty()) throw TrainError("train: empty validation set");

    const Vocabulary& vocab = train_set.vocabulary;
    std::vector<EncodedExample> train_enc;
    train_enc.reserve(train_set.examples.size());
    for (const Example& ex : train_set.examples) {
        train_enc.push_back(encode_example(ex, hyper, vocab));
        const EncodedExample& enc = train_enc.back();
        if (std::find(enc.candidates.begin(), enc.candidates.end(), enc.answer_id) ==
            enc.candidates.end())
            throw TrainError("train: answer of example '" + ex.id +
                             "' is not in its candidate set");
    }
    std::vector<EncodedExample> val_enc;
    val_enc.reserve(val_set.examples.size());
    for (const Example& ex : val_set.examples)
        val_enc.push_back(encode_example(ex, hyper, vocab));

    ModelParams params = init_params(hyper, static_cast<int>(vocab.size()), config.seed);
    AdamState state{Gradients::zeros_like(params), Gradients::zeros_like(params), 0};

    History history;
    history.config_echo = echo_config(hyper, config);
    history.plan_hash = plan_hash;

    ModelParams best_params = params;
    double best_val = -1.0;
    int epochs_since_improvement = 0;
    const Rng shuffle_base(config.seed);

    std::vector<std::size_t> order(train_enc.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng epoch_rng = shuffle_base.fork(static_cast<std::uint64_t>(epoch));
        epoch_rng.shuffle(order);

        double loss_sum = 0.0;
        int batch_index = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch_size), ++batch_index) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            std::vector<const EncodedExample*> batch;
            batch.reserve(end - begin);
            for (std::size_t k = begin; k < end; ++k) batch.push_back(&train_enc[order[k]]);

            auto [loss, grads] = loss_and_gradients(params, hyper, batch);
            if (!std::isfinite(loss))
                throw TrainError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
            loss_sum += loss * static_cast<double>(batch.size());
            clip_gradients(grads, config.grad_clip);
            apply_update(params, grads, state, config);
        }

        const double train_loss = loss_sum / static_cast<double>(train_enc.size());
        const double val_accuracy = evaluate_encoded(params, hyper, val_enc);
        history.epochs.push_back({epoch, train_loss, val_accuracy});

        if (val_accuracy > best_val) {
            best_val = val_accuracy;
            best_params = params;
            history.best_epoch = epoch;
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement >= config.patience) break;
        }
    }

    return {std::move(best_params), std::move(history)};
}

double evaluate_encoded(const ModelParams& params, const ModelHyper& hyper,
                        const std::vector<EncodedExample>& examples) {
    if (examples.empty()) throw ValidationError("evaluate: empty dataset");
    long correct = 0;
    for (const EncodedExample& enc : examples) {
        if (enc.candidates.empty())
            throw ValidationError("evaluate: example '" + enc.id + "' has no candidates");
        if (predict(params, hyper, enc.memories, enc.question, enc.candidates) == enc.answer_id)
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

double evaluate(const ModelParams& params, const ModelHyper& hyper, const Vocabulary& vocab,
                const Dataset& dataset) {
    std::vector<EncodedExample> encoded;
    encoded.reserve(dataset.examples.size());
    for (const Example& ex : dataset.examples) encoded.push_back(encode_example(ex, hyper, vocab));
    return evaluate_encoded(params, hyper, encoded);
}

}  // namespace rcdiag
