#pragma once

#include "newsmix/embedding.hpp"
#include "newsmix/rng.hpp"

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace newsmix {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Item2VecConfig {
    std::size_t dimension = 32;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;

    void validate() const {
        if (dimension < 2) throw std::invalid_argument("Item2Vec: dimension must be >= 2");
        if (window < 1) throw std::invalid_argument("Item2Vec: window must be >= 1");
    }
};

struct Item2VecResult {
    EmbeddingTable table;
    std::vector<double> epoch_mean_loss; // one entry per trained epoch
};

// Skip-gram with negative sampling over co-read pairs. Items co-occurring
// within `window` positions of a session form (center, context) pairs;
// negatives are drawn from the unigram^0.75 distribution. Input vectors are
// the published embeddings. Single-threaded and bit-deterministic given the
// seed.
class Item2VecTrainer {
public:
    explicit Item2VecTrainer(const std::vector<std::vector<ArticleId>>& sessions,
                             Item2VecConfig config)
        : config_(config) {
        config_.validate();
        for (const auto& session : sessions) {
            std::vector<std::size_t> indexed;
            indexed.reserve(session.size());
            for (const auto& id : session) {
                auto [it, inserted] = vocab_.emplace(id, ids_.size());
                if (inserted) {
                    ids_.push_back(id);
                    counts_.push_back(0);
                }
                counts_[it->second] += 1;
                indexed.push_back(it->second);
            }
            if (indexed.size() >= 2) trainable_ = true;
            sessions_.push_back(std::move(indexed));
        }
        if (!trainable_) {
            throw std::invalid_argument("Item2Vec: no trainable pair (all sessions length < 2)");
        }
        build_negative_table();
        init_weights();
    }

    Item2VecResult train() {
        Item2VecResult result;
        Rng rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
        const std::size_t total_epochs = config_.epochs;
        std::size_t step = 0;
        const std::size_t total_steps = std::max<std::size_t>(1, pair_count() * total_epochs);
        for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
            double loss_sum = 0.0;
            std::size_t loss_count = 0;
            for (const auto& session : sessions_) {
                for (std::size_t i = 0; i < session.size(); ++i) {
                    const std::size_t lo = i > config_.window ? i - config_.window : 0;
                    const std::size_t hi = std::min(session.size(), i + config_.window + 1);
                    for (std::size_t j = lo; j < hi; ++j) {
                        if (j == i) continue;
                        const double progress = static_cast<double>(step) / total_steps;
                        const double lr =
                            config_.learning_rate * std::max(1.0 - progress, 1e-4);
                        loss_sum += train_pair(session[i], session[j], lr, rng);
                        ++loss_count;
                        ++step;
                    }
                }
            }
            result.epoch_mean_loss.push_back(loss_count > 0 ? loss_sum / loss_count : 0.0);
        }
        result.table = export_table();
        return result;
    }

    EmbeddingTable export_table() const {
        EmbeddingTable table(config_.dimension);
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            table.put(ids_[i], Vector(input_.begin() + i * config_.dimension,
                                      input_.begin() + (i + 1) * config_.dimension));
        }
        return table;
    }

    // SGNS loss and gradients for one (center, context, negatives) example.
    // Used directly by training and by the finite-difference check below.
    struct PairGradients {
        double loss = 0.0;
        Vector d_center;                // w.r.t. the center's input vector
        Vector d_context;               // w.r.t. the context's output vector
        std::vector<Vector> d_negatives; // w.r.t. each negative's output vector
    };

    PairGradients pair_gradients(std::size_t center, std::size_t context,
                                 const std::vector<std::size_t>& negatives) const {
        const std::size_t d = config_.dimension;
        PairGradients g;
        g.d_center.assign(d, 0.0);
        const double* w = &input_[center * d];

        const auto accumulate = [&](std::size_t output_index, double label) {
            const double* c = &output_[output_index * d];
            double z = 0.0;
            for (std::size_t k = 0; k < d; ++k) z += w[k] * c[k];
            // -log sigmoid(z) for the positive, -log sigmoid(-z) for
            // negatives, in the overflow-safe softplus form.
            g.loss += label > 0.5 ? softplus(-z) : softplus(z);
            const double grad = sigmoid(z) - label; // dL/dz
            Vector d_out(d);
            for (std::size_t k = 0; k < d; ++k) {
                d_out[k] = grad * w[k];
                g.d_center[k] += grad * c[k];
            }
            return d_out;
        };

        g.d_context = accumulate(context, 1.0);
        g.d_negatives.reserve(negatives.size());
        for (const std::size_t neg : negatives) g.d_negatives.push_back(accumulate(neg, 0.0));
        return g;
    }

    std::size_t vocab_index(const ArticleId& id) const { return vocab_.at(id); }
    std::size_t vocab_size() const { return ids_.size(); }
    const Item2VecConfig& config() const { return config_; }

    double* input_vector(std::size_t index) { return &input_[index * config_.dimension]; }
    double* output_vector(std::size_t index) { return &output_[index * config_.dimension]; }

    std::vector<std::size_t> sample_negatives(std::size_t context, Rng& rng) const {
        std::vector<std::size_t> negatives;
        negatives.reserve(config_.negatives);
        for (std::size_t k = 0; k < config_.negatives; ++k) {
            std::size_t neg;
            do {
                neg = negative_table_[rng.uniform_int(negative_table_.size())];
            } while (neg == context && ids_.size() > 1);
            negatives.push_back(neg);
        }
        return negatives;
    }

private:
    static double softplus(double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    }

    double train_pair(std::size_t center, std::size_t context, double lr, Rng& rng) {
        const auto negatives = sample_negatives(context, rng);
        const auto g = pair_gradients(center, context, negatives);
        const std::size_t d = config_.dimension;
        double* w = &input_[center * d];
        double* c = &output_[context * d];
        for (std::size_t k = 0; k < d; ++k) c[k] -= lr * g.d_context[k];
        for (std::size_t n = 0; n < negatives.size(); ++n) {
            double* neg = &output_[negatives[n] * d];
            for (std::size_t k = 0; k < d; ++k) neg[k] -= lr * g.d_negatives[n][k];
        }
        for (std::size_t k = 0; k < d; ++k) w[k] -= lr * g.d_center[k];
        return g.loss;
    }

    void build_negative_table() {
        // Discretized unigram^0.75 distribution, word2vec style.
        double total = 0.0;
        for (const std::size_t c : counts_) total += std::pow(static_cast<double>(c), 0.75);
        const std::size_t table_size = std::max<std::size_t>(ids_.size() * 64, 4096);
        negative_table_.reserve(table_size);
        double cumulative = 0.0;
        std::size_t word = 0;
        double threshold = std::pow(static_cast<double>(counts_[0]), 0.75) / total;
        for (std::size_t i = 0; i < table_size; ++i) {
            negative_table_.push_back(word);
            cumulative = static_cast<double>(i + 1) / table_size;
            while (cumulative > threshold && word + 1 < ids_.size()) {
                ++word;
                threshold += std::pow(static_cast<double>(counts_[word]), 0.75) / total;
            }
        }
    }

    void init_weights() {
        const std::size_t d = config_.dimension;
        input_.resize(ids_.size() * d);
        output_.assign(ids_.size() * d, 0.0);
        Rng rng(config_.seed);
        for (double& x : input_) x = (rng.uniform() - 0.5) / static_cast<double>(d);
    }

    std::size_t pair_count() const {
        std::size_t count = 0;
        for (const auto& session : sessions_) {
            for (std::size_t i = 0; i < session.size(); ++i) {
                const std::size_t lo = i > config_.window ? i - config_.window : 0;
                const std::size_t hi = std::min(session.size(), i + config_.window + 1);
                count += hi - lo - 1;
            }
        }
        return count;
    }

    Item2VecConfig config_;
    std::unordered_map<ArticleId, std::size_t> vocab_;
    std::vector<ArticleId> ids_;
    std::vector<std::size_t> counts_;
    std::vector<std::vector<std::size_t>> sessions_;
    std::vector<std::size_t> negative_table_;
    std::vector<double> input_;
    std::vector<double> output_;
    bool trainable_ = false;
};

inline Item2VecResult train_item_embeddings(const std::vector<std::vector<ArticleId>>& sessions,
                                            const Item2VecConfig& config) {
    Item2VecTrainer trainer(sessions, config);
    return trainer.train();
}

// Central finite-difference check of the SGNS gradients for one example.
// Returns the maximum relative error over every parameter of the example.
// Gradients are aggregated per distinct output vector first, so repeated
// negatives (which alias one parameter) are handled correctly.
inline double sgns_gradient_check(Item2VecTrainer& trainer, std::size_t center,
                                  std::size_t context, const std::vector<std::size_t>& negatives,
                                  double step = 1e-4) {
    const std::size_t d = trainer.config().dimension;
    const auto analytic = trainer.pair_gradients(center, context, negatives);

    std::map<std::size_t, Vector> output_grads;
    const auto add_output = [&](std::size_t index, const Vector& grad) {
        auto [it, inserted] = output_grads.emplace(index, Vector(d, 0.0));
        for (std::size_t k = 0; k < d; ++k) it->second[k] += grad[k];
    };
    add_output(context, analytic.d_context);
    for (std::size_t n = 0; n < negatives.size(); ++n) {
        add_output(negatives[n], analytic.d_negatives[n]);
    }

    const auto loss_at = [&]() { return trainer.pair_gradients(center, context, negatives).loss; };

    double max_rel_error = 0.0;
    const auto check_param = [&](double* param, double analytic_grad) {
        const double saved = *param;
        *param = saved + step;
        const double plus = loss_at();
        *param = saved - step;
        const double minus = loss_at();
        *param = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        const double denom = std::max(std::abs(analytic_grad) + std::abs(numeric), 1e-8);
        max_rel_error = std::max(max_rel_error, std::abs(analytic_grad - numeric) / denom);
    };

    for (std::size_t k = 0; k < d; ++k) {
        check_param(trainer.input_vector(center) + k, analytic.d_center[k]);
    }
    for (const auto& [index, grad] : output_grads) {
        for (std::size_t k = 0; k < d; ++k) {
            check_param(trainer.output_vector(index) + k, grad[k]);
        }
    }
    return max_rel_error;
}

} // namespace newsmix
