#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>

#include "condensity/core.hpp"
#include "condensity/error.hpp"
#include "condensity/knn.hpp"
#include "condensity/mlp.hpp"
#include "condensity/transform.hpp"
#include "condensity/tree.hpp"

namespace condensity {

enum class Backend { Tree, Mlp, Knn };

inline std::string backend_name(Backend b) {
    switch (b) {
        case Backend::Tree: return "tree";
        case Backend::Mlp: return "mlp";
        case Backend::Knn: return "knn";
    }
    throw ConfigError("unknown backend");
}

inline Backend parse_backend(const std::string& name) {
    if (name == "tree") return Backend::Tree;
    if (name == "mlp") return Backend::Mlp;
    if (name == "knn") return Backend::Knn;
    throw ConfigError("unknown backend '" + name + "' (expected tree|mlp|knn)");
}

struct KnnParams {
    int k = 1;

    void validate() const {
        if (k < 1) throw ConfigError("knn config: k must be >= 1");
    }
};

struct RegressorConfig {
    Backend backend = Backend::Tree;
    TreeParams tree;
    MlpParams mlp;
    KnnParams knn;

    void validate() const {
        tree.validate();
        mlp.validate();
        knn.validate();
    }

    // Round budget of the iterative protocol; kNN trains in zero rounds.
    int max_rounds() const {
        switch (backend) {
            case Backend::Tree: return tree.max_rounds;
            case Backend::Mlp: return mlp.max_epochs;
            case Backend::Knn: return 0;
        }
        throw ConfigError("unknown backend");
    }
};

using RegressorModel = std::variant<TreeModel, MlpModel, KnnModel>;

inline std::size_t input_dim(const RegressorModel& model) {
    return std::visit([](const auto& m) { return m.input_dim(); }, model);
}

inline Vector predict(const RegressorModel& model, const Matrix& features) {
    return std::visit([&](const auto& m) { return m.predict(features); }, model);
}

// Iterative training state behind the uniform fit/train/snapshot contract.
// Trainers holding a design reference require it to outlive the state.
class TrainState {
public:
    static TrainState init(const RegressorConfig& config, const AuxiliaryDesign& design,
                           std::uint64_t seed) {
        config.validate();
        if (design.rows() == 0) throw ConfigError("fit_init: empty design");
        TrainState st;
        st.backend_ = config.backend;
        switch (config.backend) {
            case Backend::Tree:
                st.tree_ = std::make_unique<TreeTrainer>(config.tree, design);
                break;
            case Backend::Mlp:
                st.mlp_ = std::make_unique<MlpTrainer>(config.mlp, design, seed);
                break;
            case Backend::Knn: {
                if (static_cast<std::size_t>(config.knn.k) > design.rows())
                    throw ConfigError("fit_init: k exceeds design rows");
                KnnModel m;
                m.k = config.knn.k;
                m.train_features = design.features;
                m.train_targets = design.targets;
                st.knn_ = std::move(m);
                break;
            }
        }
        return st;
    }

    Backend backend() const { return backend_; }

    bool exhausted() const {
        switch (backend_) {
            case Backend::Tree: return tree_->exhausted();
            case Backend::Mlp: return mlp_->exhausted();
            case Backend::Knn: return true;
        }
        return true;
    }

    int rounds_done() const {
        switch (backend_) {
            case Backend::Tree: return tree_->rounds_done();
            case Backend::Mlp: return mlp_->rounds_done();
            case Backend::Knn: return 0;
        }
        return 0;
    }

    void train_round() {
        switch (backend_) {
            case Backend::Tree: tree_->train_round(); return;
            case Backend::Mlp: mlp_->train_round(); return;
            case Backend::Knn: throw Exhausted("knn backend trains in fit_init");
        }
    }

    double training_mse() const {
        switch (backend_) {
            case Backend::Tree: return tree_->training_mse();
            case Backend::Mlp: return mlp_->training_mse();
            case Backend::Knn: throw ConfigError("knn backend has no training loop");
        }
        throw ConfigError("unknown backend");
    }

    RegressorModel snapshot() const {
        switch (backend_) {
            case Backend::Tree: return tree_->model();
            case Backend::Mlp: return mlp_->model();
            case Backend::Knn: return *knn_;
        }
        throw ConfigError("unknown backend");
    }

    TreeTrainer& tree_trainer() { return *tree_; }
    MlpTrainer& mlp_trainer() { return *mlp_; }

private:
    Backend backend_ = Backend::Knn;
    std::unique_ptr<TreeTrainer> tree_;
    std::unique_ptr<MlpTrainer> mlp_;
    std::optional<KnnModel> knn_;
};

inline TrainState fit_init(const RegressorConfig& config, const AuxiliaryDesign& design,
                           std::uint64_t seed) {
    return TrainState::init(config, design, seed);
}

inline void train_round(TrainState& state) { state.train_round(); }

} // namespace condensity
