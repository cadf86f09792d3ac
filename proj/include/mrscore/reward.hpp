#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrscore/corpus.hpp"
#include "mrscore/jsonl.hpp"
#include "mrscore/rng.hpp"
#include "mrscore/textprep.hpp"

namespace mrscore {

// The learned metric: a linear reward head with sigmoid output over text
// features of a (ground_truth, candidate) pair, trained on accepted/rejected
// pairs with the margin-aware pairwise logistic loss. The feature extractor
// is a deliberately cheap stand-in for an LLM encoder - signed hashed
// candidate n-grams plus a few overlap/length auxiliaries - and featurize()
// is the seam where a heavier encoder would plug in.

struct FeatureConfig {
    std::size_t dim = 4096;                       // hashed block size, power of two
    std::vector<std::size_t> ngram_orders = {1, 2};
    std::uint64_t hash_seed = 0x6d7273636f726531ull;
    bool include_overlap_features = true;
};

constexpr std::size_t kAuxFeatureCount = 6;

inline void validate(const FeatureConfig& c) {
    if (c.dim < 16 || (c.dim & (c.dim - 1)) != 0)
        throw std::invalid_argument("feature dim must be a power of two >= 16");
    if (c.ngram_orders.empty()) throw std::invalid_argument("ngram_orders must be non-empty");
    for (std::size_t n : c.ngram_orders)
        if (n == 0) throw std::invalid_argument("ngram order 0 is invalid");
}

inline std::size_t feature_size(const FeatureConfig& c) {
    return c.dim + (c.include_overlap_features ? kAuxFeatureCount : 0);
}

using FeatureVector = std::vector<double>;

namespace detail {

inline int clipped_matches(const NgramCounts& a, const NgramCounts& b) {
    int m = 0;
    for (const auto& [g, cnt] : a) {
        auto it = b.find(g);
        if (it != b.end()) m += std::min(cnt, it->second);
    }
    return m;
}

inline bool has_token(const TokenSequence& toks, const std::string& t) {
    for (const auto& tok : toks)
        if (tok == t) return true;
    return false;
}

}  // namespace detail

// Deterministic for a fixed hash seed: candidate n-grams go through signed
// feature hashing into dim buckets (L2-normalized), then the auxiliary
// features are appended in fixed order: candidate/ground-truth length
// ratio, unigram overlap precision and recall, bigram overlap F1, and an
// "impression" token flag for each text.
inline FeatureVector featurize(const std::string& ground_truth, const std::string& candidate,
                               const FeatureConfig& config) {
    validate(config);
    FeatureVector v(feature_size(config), 0.0);

    TokenSequence cand = tokenize(candidate);
    TokenSequence gt = tokenize(ground_truth);

    for (std::size_t order : config.ngram_orders) {
        const std::uint64_t order_seed = mix_seed(config.hash_seed, order);
        if (cand.size() < order) continue;
        for (std::size_t i = 0; i + order <= cand.size(); ++i) {
            std::uint64_t h = fnv1a64(join_gram(cand, i, order), order_seed);
            std::size_t bucket = static_cast<std::size_t>(h & (config.dim - 1));
            double sign = (h >> 63) ? -1.0 : 1.0;
            v[bucket] += sign;
        }
    }

    double norm = 0.0;
    for (std::size_t i = 0; i < config.dim; ++i) norm += v[i] * v[i];
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < config.dim; ++i) v[i] /= norm;
    }

    if (config.include_overlap_features) {
        std::size_t base = config.dim;
        double len_ratio = gt.empty() ? 0.0
                                      : static_cast<double>(cand.size()) /
                                            static_cast<double>(gt.size());
        NgramCounts cu = ngrams(cand, 1), gu = ngrams(gt, 1);
        NgramCounts cb = ngrams(cand, 2), gb = ngrams(gt, 2);
        int uni = detail::clipped_matches(cu, gu);
        int bi = detail::clipped_matches(cb, gb);
        double up = cand.empty() ? 0.0 : static_cast<double>(uni) / cand.size();
        double ur = gt.empty() ? 0.0 : static_cast<double>(uni) / gt.size();
        double bp = cand.size() < 2 ? 0.0 : static_cast<double>(bi) / (cand.size() - 1);
        double br = gt.size() < 2 ? 0.0 : static_cast<double>(bi) / (gt.size() - 1);
        double bf1 = (bp + br > 0.0) ? 2.0 * bp * br / (bp + br) : 0.0;
        v[base + 0] = len_ratio;
        v[base + 1] = up;
        v[base + 2] = ur;
        v[base + 3] = bf1;
        v[base + 4] = detail::has_token(cand, "impression") ? 1.0 : 0.0;
        v[base + 5] = detail::has_token(gt, "impression") ? 1.0 : 0.0;
    }
    return v;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// softplus(-a) = -ln(sigmoid(a)), computed without overflow
inline double neg_log_sigmoid(double a) {
    return std::max(-a, 0.0) + std::log1p(std::exp(-std::fabs(a)));
}

struct RewardModel {
    FeatureConfig feature_config;
    std::vector<double> weights;  // length feature_size(feature_config)
    double bias = 0.0;
    std::map<std::string, double> training_meta;
};

inline RewardModel zero_model(const FeatureConfig& config) {
    validate(config);
    RewardModel m;
    m.feature_config = config;
    m.weights.assign(feature_size(config), 0.0);
    return m;
}

inline double reward_from_features(const RewardModel& model, std::span<const double> phi) {
    if (phi.size() != model.weights.size())
        throw std::invalid_argument("feature/weight dimension mismatch: " +
                                    std::to_string(phi.size()) + " vs " +
                                    std::to_string(model.weights.size()));
    double z = model.bias;
    for (std::size_t i = 0; i < phi.size(); ++i) z += model.weights[i] * phi[i];
    double r = sigmoid(z);
    // keep the contract strict even under saturation
    if (r <= 0.0) r = std::numeric_limits<double>::min();
    if (r >= 1.0) r = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    return r;
}

// The MRScore of a candidate against its ground truth, in (0, 1).
inline double reward(const RewardModel& model, const std::string& ground_truth,
                     const std::string& candidate) {
    return reward_from_features(model, featurize(ground_truth, candidate, model.feature_config));
}

// -ln sigma(r_w - r_l - m): zero-cost only when the accepted reward clears
// the rejected one by more than the margin.
inline double pair_loss(double r_w, double r_l, double m) {
    return neg_log_sigmoid(r_w - r_l - m);
}

struct FeaturizedPair {
    FeatureVector accepted;
    FeatureVector rejected;
    double margin = 0.0;
};

inline std::vector<FeaturizedPair> featurize_pairs(const std::vector<ReportPair>& pairs,
                                                   const FeatureConfig& config) {
    std::vector<FeaturizedPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        FeaturizedPair fp;
        fp.accepted = featurize(p.ground_truth, p.accepted, config);
        fp.rejected = featurize(p.ground_truth, p.rejected, config);
        fp.margin = p.margin;
        out.push_back(std::move(fp));
    }
    return out;
}

inline double batch_loss_featurized(const RewardModel& model,
                                    std::span<const FeaturizedPair> pairs,
                                    double l2_penalty = 0.0) {
    if (pairs.empty()) throw std::invalid_argument("batch_loss over an empty batch");
    double sum = 0.0;
    for (const auto& p : pairs) {
        double rw = reward_from_features(model, p.accepted);
        double rl = reward_from_features(model, p.rejected);
        sum += pair_loss(rw, rl, p.margin);
    }
    double loss = sum / static_cast<double>(pairs.size());
    if (l2_penalty != 0.0) {
        double w2 = 0.0;
        for (double w : model.weights) w2 += w * w;
        loss += l2_penalty * w2 / 2.0;
    }
    return loss;
}

// Mean pairwise loss over the batch plus the L2 term.
inline double batch_loss(const RewardModel& model, const std::vector<ReportPair>& pairs,
                         double l2_penalty = 0.0) {
    auto fp = featurize_pairs(pairs, model.feature_config);
    return batch_loss_featurized(model, fp, l2_penalty);
}

struct Gradient {
    std::vector<double> weights;
    double bias = 0.0;
};

// Exact gradient of batch_loss. Per pair, with a = r_w - r_l - m:
// dL/da = -sigma(-a), chained through both sigmoid heads.
inline Gradient gradient_featurized(const RewardModel& model,
                                    std::span<const FeaturizedPair> pairs,
                                    double l2_penalty = 0.0) {
    if (pairs.empty()) throw std::invalid_argument("gradient over an empty batch");
    Gradient g;
    g.weights.assign(model.weights.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (const auto& p : pairs) {
        double rw = reward_from_features(model, p.accepted);
        double rl = reward_from_features(model, p.rejected);
        double a = rw - rl - p.margin;
        double dl_da = -sigmoid(-a);
        double cw = dl_da * rw * (1.0 - rw) * inv_n;
        double cl = -dl_da * rl * (1.0 - rl) * inv_n;
        for (std::size_t i = 0; i < g.weights.size(); ++i)
            g.weights[i] += cw * p.accepted[i] + cl * p.rejected[i];
        g.bias += cw + cl;
    }
    if (l2_penalty != 0.0)
        for (std::size_t i = 0; i < g.weights.size(); ++i)
            g.weights[i] += l2_penalty * model.weights[i];
    return g;
}

inline Gradient gradient(const RewardModel& model, const std::vector<ReportPair>& pairs,
                         double l2_penalty = 0.0) {
    auto fp = featurize_pairs(pairs, model.feature_config);
    return gradient_featurized(model, fp, l2_penalty);
}

struct TrainingConfig {
    double learning_rate = 0.05;
    int epochs = 50;
    std::size_t batch_size = 16;
    double l2_penalty = 1e-4;
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::function<void(int epoch, double loss)> epoch_callback;
};

inline void validate(const TrainingConfig& c) {
    if (c.batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (c.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (c.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
}

// Mini-batch gradient descent from zero-initialized weights; deterministic
// for a fixed seed. After every epoch the full-dataset loss is recorded
// (epoch_callback) and the final one lands in training_meta.
inline RewardModel train(const std::vector<ReportPair>& pairs, const FeatureConfig& feature_config,
                         const TrainingConfig& training_config) {
    if (pairs.empty()) throw std::invalid_argument("train needs at least one pair");
    validate(training_config);
    RewardModel model = zero_model(feature_config);

    std::vector<FeaturizedPair> fp = featurize_pairs(pairs, feature_config);
    std::vector<std::size_t> order(fp.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(training_config.seed, 0x7261696eull));  // independent shuffle stream

    double epoch_loss = 0.0;
    std::vector<FeaturizedPair> batch;
    for (int epoch = 0; epoch < training_config.epochs; ++epoch) {
        if (training_config.shuffle) rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += training_config.batch_size) {
            std::size_t end = std::min(start + training_config.batch_size, order.size());
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(fp[order[k]]);
            Gradient g = gradient_featurized(model, batch, training_config.l2_penalty);
            for (std::size_t i = 0; i < model.weights.size(); ++i)
                model.weights[i] -= training_config.learning_rate * g.weights[i];
            model.bias -= training_config.learning_rate * g.bias;
        }
        epoch_loss = batch_loss_featurized(model, fp, training_config.l2_penalty);
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("training loss diverged at epoch " + std::to_string(epoch) +
                                     "; lower the learning rate");
        if (training_config.epoch_callback) training_config.epoch_callback(epoch, epoch_loss);
    }

    model.training_meta["seed"] = static_cast<double>(training_config.seed);
    model.training_meta["epochs"] = static_cast<double>(training_config.epochs);
    model.training_meta["final_loss"] = epoch_loss;
    return model;
}

// Fraction of pairs whose accepted side earns the strictly higher reward.
inline double evaluate_ranking(const RewardModel& model, const std::vector<ReportPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("evaluate_ranking over an empty set");
    std::size_t correct = 0;
    for (const auto& p : pairs) {
        double rw = reward(model, p.ground_truth, p.accepted);
        double rl = reward(model, p.ground_truth, p.rejected);
        if (rw > rl) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Model persistence: versioned JSON, bit-exact reward round-trip.
// ---------------------------------------------------------------------------

constexpr int kModelFormatVersion = 1;

struct ModelFormatError : std::runtime_error {
    enum class Kind { version, corrupt };
    ModelFormatError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    Kind kind;
};

inline void save_model(const RewardModel& model, const std::string& path) {
    Json j;
    j["version"] = kModelFormatVersion;
    Json fc;
    fc["dim"] = model.feature_config.dim;
    fc["ngram_orders"] = model.feature_config.ngram_orders;
    fc["hash_seed"] = model.feature_config.hash_seed;
    fc["include_overlap_features"] = model.feature_config.include_overlap_features;
    j["feature_config"] = fc;
    j["weights"] = model.weights;
    j["bias"] = model.bias;
    j["training_meta"] = model.training_meta;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed on " + path);
}

inline RewardModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelFormatError(ModelFormatError::Kind::corrupt,
                               path + ": corrupt model file: " + e.what());
    }
    try {
        int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw ModelFormatError(ModelFormatError::Kind::version,
                                   path + ": unsupported model version " +
                                       std::to_string(version) + " (expected " +
                                       std::to_string(kModelFormatVersion) + ")");
        RewardModel m;
        const Json& fc = j.at("feature_config");
        m.feature_config.dim = fc.at("dim").get<std::size_t>();
        m.feature_config.ngram_orders = fc.at("ngram_orders").get<std::vector<std::size_t>>();
        m.feature_config.hash_seed = fc.at("hash_seed").get<std::uint64_t>();
        m.feature_config.include_overlap_features =
            fc.at("include_overlap_features").get<bool>();
        validate(m.feature_config);
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        if (j.contains("training_meta"))
            m.training_meta = j.at("training_meta").get<std::map<std::string, double>>();
        if (m.weights.size() != feature_size(m.feature_config))
            throw ModelFormatError(ModelFormatError::Kind::corrupt,
                                   path + ": weight count does not match feature config");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(ModelFormatError::Kind::corrupt,
                               path + ": corrupt model file: " + e.what());
    }
}

}  // namespace mrscore
