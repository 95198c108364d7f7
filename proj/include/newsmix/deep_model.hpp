#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/embedding.hpp"
#include "newsmix/item2vec.hpp" // sigmoid
#include "newsmix/rng.hpp"
#include "newsmix/serialize.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace newsmix {

// Article metadata lookup used when assembling feature vectors.
class ArticleCatalog {
public:
    ArticleCatalog() = default;

    explicit ArticleCatalog(const std::vector<Article>& articles) {
        for (const auto& a : articles) put(a);
    }

    void put(Article article) {
        article.validate();
        articles_[article.id] = std::move(article);
    }

    const Article* find(const ArticleId& id) const {
        const auto it = articles_.find(id);
        return it != articles_.end() ? &it->second : nullptr;
    }

    std::size_t size() const { return articles_.size(); }

    const std::unordered_map<ArticleId, Article>& articles() const { return articles_; }

private:
    std::unordered_map<ArticleId, Article> articles_;
};

// z-score parameters for the auxiliary features, frozen at training time.
struct FeatureNormalization {
    double length_mean = 0.0;
    double length_sd = 1.0;
    double age_mean = 0.0;
    double age_sd = 1.0;

    double normalize_length(double raw) const { return (raw - length_mean) / length_sd; }
    double normalize_age(double raw) const { return (raw - age_mean) / age_sd; }
};

constexpr std::size_t kAuxiliaryFeatures = 2; // normalized length, normalized age

// [user embedding | article embedding | length, age], dimension 2d + 2.
inline Vector build_feature_vector(const Vector& user_embedding, const Vector& article_embedding,
                                   double raw_length, double raw_age_seconds,
                                   const FeatureNormalization& norm) {
    Vector x;
    x.reserve(user_embedding.size() + article_embedding.size() + kAuxiliaryFeatures);
    x.insert(x.end(), user_embedding.begin(), user_embedding.end());
    x.insert(x.end(), article_embedding.begin(), article_embedding.end());
    x.push_back(norm.normalize_length(raw_length));
    x.push_back(norm.normalize_age(raw_age_seconds));
    return x;
}

struct TrainingSample {
    Vector features;
    double label = 0.0;  // 0 or 1
    double weight = 1.0; // > 0; label 0 implies weight 1
};

struct DeepModelConfig {
    std::size_t input_dim = 0;
    std::size_t hidden = 64;
    double learning_rate = 0.05;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
};

// Feed-forward click model: input -> hidden (ReLU) -> 1 (sigmoid), trained
// with weighted binary cross-entropy by mini-batch SGD.
class DeepModel {
public:
    DeepModel() = default;

    DeepModel(DeepModelConfig config, FeatureNormalization norm)
        : config_(config), norm_(norm) {
        if (config_.input_dim == 0) throw std::invalid_argument("DeepModel: input_dim must be > 0");
        if (config_.hidden == 0) throw std::invalid_argument("DeepModel: hidden must be > 0");
        init_weights();
    }

    const DeepModelConfig& config() const { return config_; }
    const FeatureNormalization& normalization() const { return norm_; }

    // Output probability, clamped into the open interval (0, 1).
    double predict(const Vector& features) const {
        return sigmoid_clamped(logit(features));
    }

    double logit(const Vector& features) const {
        if (features.size() != config_.input_dim) {
            throw std::invalid_argument("DeepModel: feature dimension mismatch");
        }
        thread_local Vector hidden;
        hidden.assign(config_.hidden, 0.0);
        forward_hidden(features, hidden);
        double z = b2_;
        for (std::size_t h = 0; h < config_.hidden; ++h) z += w2_[h] * hidden[h];
        return z;
    }

    // Pre-ReLU hidden activations; lets finite-difference checks avoid
    // probing within a step of the ReLU kink.
    Vector hidden_preactivations(const Vector& features) const {
        const std::size_t in = config_.input_dim;
        Vector pre(config_.hidden, 0.0);
        for (std::size_t h = 0; h < config_.hidden; ++h) {
            double z = b1_[h];
            const double* row = &w1_[h * in];
            for (std::size_t i = 0; i < in; ++i) z += row[i] * features[i];
            pre[h] = z;
        }
        return pre;
    }

    // Weighted BCE for one sample plus gradients for all parameters.
    struct Gradients {
        double loss = 0.0;
        std::vector<double> d_w1;
        std::vector<double> d_b1;
        std::vector<double> d_w2;
        double d_b2 = 0.0;
    };

    Gradients gradients(const TrainingSample& sample) const {
        const std::size_t in = config_.input_dim;
        const std::size_t hid = config_.hidden;
        if (sample.features.size() != in) {
            throw std::invalid_argument("DeepModel: feature dimension mismatch");
        }

        Vector hidden(hid, 0.0);
        Vector pre(hid, 0.0);
        for (std::size_t h = 0; h < hid; ++h) {
            double z = b1_[h];
            const double* row = &w1_[h * in];
            for (std::size_t i = 0; i < in; ++i) z += row[i] * sample.features[i];
            pre[h] = z;
            hidden[h] = z > 0.0 ? z : 0.0;
        }
        double z_out = b2_;
        for (std::size_t h = 0; h < hid; ++h) z_out += w2_[h] * hidden[h];

        const double y = sample.label;
        const double w = sample.weight;
        // softplus(z) - y z == -y log p - (1 - y) log(1 - p), stable for any z.
        Gradients g;
        g.loss = w * (softplus(z_out) - y * z_out);
        const double delta_out = w * (sigmoid(z_out) - y);

        g.d_w2.resize(hid);
        for (std::size_t h = 0; h < hid; ++h) g.d_w2[h] = delta_out * hidden[h];
        g.d_b2 = delta_out;

        g.d_w1.assign(hid * in, 0.0);
        g.d_b1.assign(hid, 0.0);
        for (std::size_t h = 0; h < hid; ++h) {
            if (pre[h] <= 0.0) continue; // ReLU gate
            const double delta_h = delta_out * w2_[h];
            g.d_b1[h] = delta_h;
            double* row = &g.d_w1[h * in];
            for (std::size_t i = 0; i < in; ++i) row[i] = delta_h * sample.features[i];
        }
        return g;
    }

    void apply(const Gradients& g, double lr) {
        for (std::size_t i = 0; i < w1_.size(); ++i) w1_[i] -= lr * g.d_w1[i];
        for (std::size_t i = 0; i < b1_.size(); ++i) b1_[i] -= lr * g.d_b1[i];
        for (std::size_t i = 0; i < w2_.size(); ++i) w2_[i] -= lr * g.d_w2[i];
        b2_ -= lr * g.d_b2;
    }

    std::vector<double*> parameters() {
        std::vector<double*> params;
        params.reserve(w1_.size() + b1_.size() + w2_.size() + 1);
        for (auto& x : w1_) params.push_back(&x);
        for (auto& x : b1_) params.push_back(&x);
        for (auto& x : w2_) params.push_back(&x);
        params.push_back(&b2_);
        return params;
    }

    std::vector<double> parameter_gradients(const Gradients& g) const {
        std::vector<double> flat;
        flat.reserve(g.d_w1.size() + g.d_b1.size() + g.d_w2.size() + 1);
        flat.insert(flat.end(), g.d_w1.begin(), g.d_w1.end());
        flat.insert(flat.end(), g.d_b1.begin(), g.d_b1.end());
        flat.insert(flat.end(), g.d_w2.begin(), g.d_w2.end());
        flat.push_back(g.d_b2);
        return flat;
    }

    bool operator==(const DeepModel& other) const {
        return w1_ == other.w1_ && b1_ == other.b1_ && w2_ == other.w2_ && b2_ == other.b2_;
    }

    // Snapshot format (version 1):
    //   newsmix-deep-model v1
    //   input <n> hidden <h> lr <x> epochs <n> batch <n> seed <n>
    //   norm <length_mean> <length_sd> <age_mean> <age_sd>
    //   w1 <...> / b1 <...> / w2 <...> / b2 <x>
    std::string serialize() const {
        std::string out = "newsmix-deep-model v1\n";
        out += "input " + std::to_string(config_.input_dim) + " hidden " +
               std::to_string(config_.hidden) + " lr " + format_double(config_.learning_rate) +
               " epochs " + std::to_string(config_.epochs) + " batch " +
               std::to_string(config_.batch_size) + " seed " + std::to_string(config_.seed) + "\n";
        out += "norm " + format_double(norm_.length_mean) + " " + format_double(norm_.length_sd) +
               " " + format_double(norm_.age_mean) + " " + format_double(norm_.age_sd) + "\n";
        const auto dump = [&out](const char* tag, const std::vector<double>& values) {
            out += tag;
            for (double x : values) {
                out += ' ';
                out += format_double(x);
            }
            out += '\n';
        };
        dump("w1", w1_);
        dump("b1", b1_);
        dump("w2", w2_);
        out += "b2 " + format_double(b2_) + "\n";
        return out;
    }

    static DeepModel deserialize(const std::string& text) {
        const auto lines = split_view(text, '\n');
        std::size_t n = 0;
        const auto next_line = [&]() -> std::string_view {
            while (n < lines.size() && lines[n].empty()) ++n;
            if (n >= lines.size()) throw std::invalid_argument("deep snapshot: truncated");
            return lines[n++];
        };
        if (next_line() != "newsmix-deep-model v1") {
            throw std::invalid_argument("deep snapshot: bad header");
        }
        const auto meta = split_view(next_line(), ' ');
        if (meta.size() != 12 || meta[0] != "input" || meta[2] != "hidden" || meta[4] != "lr" ||
            meta[6] != "epochs" || meta[8] != "batch" || meta[10] != "seed") {
            throw std::invalid_argument("deep snapshot: bad meta line");
        }
        DeepModelConfig config;
        config.input_dim = static_cast<std::size_t>(parse_int64(meta[1]));
        config.hidden = static_cast<std::size_t>(parse_int64(meta[3]));
        config.learning_rate = parse_double(meta[5]);
        config.epochs = static_cast<std::size_t>(parse_int64(meta[7]));
        config.batch_size = static_cast<std::size_t>(parse_int64(meta[9]));
        config.seed = static_cast<std::uint64_t>(parse_int64(meta[11]));

        const auto norm_fields = split_view(next_line(), ' ');
        if (norm_fields.size() != 5 || norm_fields[0] != "norm") {
            throw std::invalid_argument("deep snapshot: bad norm line");
        }
        FeatureNormalization norm;
        norm.length_mean = parse_double(norm_fields[1]);
        norm.length_sd = parse_double(norm_fields[2]);
        norm.age_mean = parse_double(norm_fields[3]);
        norm.age_sd = parse_double(norm_fields[4]);

        DeepModel model(config, norm);
        const auto load_row = [&](const char* tag, std::vector<double>& values,
                                  std::size_t expected) {
            const auto fields = split_view(next_line(), ' ');
            if (fields.size() != expected + 1 || fields[0] != tag) {
                throw std::invalid_argument(std::string("deep snapshot: bad ") + tag + " line");
            }
            values.resize(expected);
            for (std::size_t i = 0; i < expected; ++i) {
                values[i] = parse_double(fields[i + 1]);
                if (!std::isfinite(values[i])) {
                    throw std::invalid_argument("deep snapshot: non-finite parameter");
                }
            }
        };
        load_row("w1", model.w1_, config.input_dim * config.hidden);
        load_row("b1", model.b1_, config.hidden);
        load_row("w2", model.w2_, config.hidden);
        const auto b2_fields = split_view(next_line(), ' ');
        if (b2_fields.size() != 2 || b2_fields[0] != "b2") {
            throw std::invalid_argument("deep snapshot: bad b2 line");
        }
        model.b2_ = parse_double(b2_fields[1]);
        return model;
    }

    void save(const std::string& path) const { write_text_file(path, serialize()); }
    static DeepModel load(const std::string& path) { return deserialize(read_text_file(path)); }

private:
    static double softplus(double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }

    static double sigmoid_clamped(double z) {
        const double p = sigmoid(z);
        return std::clamp(p, 1e-12, 1.0 - 1e-12);
    }

    void forward_hidden(const Vector& features, Vector& hidden) const {
        const std::size_t in = config_.input_dim;
        for (std::size_t h = 0; h < config_.hidden; ++h) {
            double z = b1_[h];
            const double* row = &w1_[h * in];
            for (std::size_t i = 0; i < in; ++i) z += row[i] * features[i];
            hidden[h] = z > 0.0 ? z : 0.0;
        }
    }

    void init_weights() {
        Rng rng(config_.seed);
        const double scale1 = std::sqrt(2.0 / static_cast<double>(config_.input_dim));
        const double scale2 = std::sqrt(2.0 / static_cast<double>(config_.hidden));
        w1_.resize(config_.input_dim * config_.hidden);
        for (double& x : w1_) x = rng.normal() * scale1;
        b1_.assign(config_.hidden, 0.0);
        w2_.resize(config_.hidden);
        for (double& x : w2_) x = rng.normal() * scale2;
        b2_ = 0.0;
    }

    DeepModelConfig config_;
    FeatureNormalization norm_;
    std::vector<double> w1_; // hidden x input, row-major
    std::vector<double> b1_;
    std::vector<double> w2_;
    double b2_ = 0.0;
};

struct TrainingRunResult {
    DeepModel model;
    std::vector<double> epoch_mean_loss;
};

// Mini-batch SGD on the weighted BCE. Deterministic given the seed; raises
// on a non-finite loss instead of clamping it away.
inline TrainingRunResult train_deep(const std::vector<TrainingSample>& samples,
                                    const DeepModelConfig& config,
                                    const FeatureNormalization& norm) {
    if (samples.empty()) throw std::invalid_argument("train_deep: no samples");
    bool has_positive = false;
    bool has_negative = false;
    for (const auto& s : samples) {
        (s.label > 0.5 ? has_positive : has_negative) = true;
    }
    if (!has_positive || !has_negative) {
        throw std::invalid_argument("train_deep: both classes must be present");
    }

    TrainingRunResult result{DeepModel(config, norm), {}};
    Rng rng(config.seed ^ 0xd1b54a32d192ed03ULL);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t batch = std::max<std::size_t>(config.batch_size, 1);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        double weight_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(start + batch, order.size());
            DeepModel::Gradients acc;
            for (std::size_t idx = start; idx < end; ++idx) {
                const auto& sample = samples[order[idx]];
                const auto g = result.model.gradients(sample);
                loss_sum += g.loss;
                weight_sum += sample.weight;
                if (acc.d_w1.empty()) {
                    acc = g;
                } else {
                    for (std::size_t i = 0; i < acc.d_w1.size(); ++i) acc.d_w1[i] += g.d_w1[i];
                    for (std::size_t i = 0; i < acc.d_b1.size(); ++i) acc.d_b1[i] += g.d_b1[i];
                    for (std::size_t i = 0; i < acc.d_w2.size(); ++i) acc.d_w2[i] += g.d_w2[i];
                    acc.d_b2 += g.d_b2;
                    acc.loss += g.loss;
                }
            }
            if (!std::isfinite(acc.loss)) {
                throw std::runtime_error("train_deep: non-finite loss at epoch " +
                                         std::to_string(epoch));
            }
            result.model.apply(acc, config.learning_rate / static_cast<double>(end - start));
        }
        result.epoch_mean_loss.push_back(loss_sum / std::max(weight_sum, 1e-12));
    }
    return result;
}

// Central finite-difference check of the deep model's gradients on one
// sample; returns the maximum relative error over all parameters.
inline double deep_gradient_check(DeepModel& model, const TrainingSample& sample,
                                  double step = 1e-4) {
    const auto analytic = model.parameter_gradients(model.gradients(sample));
    const auto params = model.parameters();

    double max_rel_error = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + step;
        const double plus = model.gradients(sample).loss;
        *params[i] = saved - step;
        const double minus = model.gradients(sample).loss;
        *params[i] = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        const double denom = std::max(std::abs(analytic[i]) + std::abs(numeric), 1e-8);
        max_rel_error = std::max(max_rel_error, std::abs(analytic[i] - numeric) / denom);
    }
    return max_rel_error;
}

} // namespace newsmix
