#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statenet/checkpoint.hpp"
#include "statenet/evaluation.hpp"
#include "statenet/model.hpp"
#include "statenet/optim.hpp"

namespace statenet {

enum class Regime { Separate, Shared, SharedPretrained };
enum class OptimizerKind { RmsProp, Adam };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::Separate: return "separate";
        case Regime::Shared: return "shared";
        case Regime::SharedPretrained: return "shared_pretrained";
    }
    return "?";
}

inline Regime regime_from_string(const std::string& s) {
    if (s == "separate") return Regime::Separate;
    if (s == "shared") return Regime::Shared;
    if (s == "shared_pretrained") return Regime::SharedPretrained;
    throw ConfigError("unknown regime '" + s + "' (expected separate|shared|shared_pretrained)");
}

inline std::string to_string(OptimizerKind o) {
    return o == OptimizerKind::RmsProp ? "rmsprop" : "adam";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "rmsprop") return OptimizerKind::RmsProp;
    if (s == "adam") return OptimizerKind::Adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected rmsprop|adam)");
}

inline constexpr double kRmsPropDefaultLr = 0.0005;
inline constexpr double kAdamDefaultLr = 0.001;

// One training run's knobs. Call finalize() after filling from file/flags:
// it materializes every default (optimizer by regime, learning rate by
// optimizer, pre-training budget by epochs) so the manifest can record a
// fully resolved configuration.
struct TrainingConfig {
    Regime regime = Regime::Shared;
    std::optional<OptimizerKind> optimizer;
    double learning_rate = 0; // 0 -> default for the optimizer
    std::size_t batch_size = 32;
    std::size_t epochs = 150;
    std::uint64_t seed = 0;
    std::string pretrain_slot;
    std::optional<std::size_t> pretrain_epochs;    // default: same as epochs
    double pretrain_learning_rate = 0;             // phase-1 RMSProp lr, 0 -> 0.0005
    bool batch_mean = true;                        // mean (default) vs sum reduction per batch
    double grad_clip_norm = 0;                     // 0 -> no clipping

    void finalize() {
        if (!optimizer)
            optimizer = regime == Regime::SharedPretrained ? OptimizerKind::Adam : OptimizerKind::RmsProp;
        if (learning_rate == 0)
            learning_rate = *optimizer == OptimizerKind::RmsProp ? kRmsPropDefaultLr : kAdamDefaultLr;
        if (!pretrain_epochs) pretrain_epochs = epochs;
        if (pretrain_learning_rate == 0) pretrain_learning_rate = kRmsPropDefaultLr;
    }

    void validate() const {
        if (!optimizer) throw ConfigError("training config not finalized");
        if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
        if (learning_rate <= 0) throw ConfigError("learning_rate must be positive");
        if (regime == Regime::SharedPretrained && pretrain_slot.empty())
            throw ConfigError("regime shared_pretrained requires the field \"pretrain_slot\"");
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"regime", to_string(regime)},
                         {"learning_rate", learning_rate},
                         {"batch_size", batch_size},
                         {"epochs", epochs},
                         {"seed", seed},
                         {"batch_reduction", batch_mean ? "mean" : "sum"},
                         {"grad_clip_norm", grad_clip_norm}};
        if (optimizer) j["optimizer"] = to_string(*optimizer);
        if (!pretrain_slot.empty()) j["pretrain_slot"] = pretrain_slot;
        if (pretrain_epochs) j["pretrain_epochs"] = *pretrain_epochs;
        if (pretrain_learning_rate > 0) j["pretrain_learning_rate"] = pretrain_learning_rate;
        return j;
    }

    static TrainingConfig from_json(const nlohmann::json& j) {
        TrainingConfig c;
        if (j.contains("regime")) c.regime = regime_from_string(j.at("regime").get<std::string>());
        if (j.contains("optimizer"))
            c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("pretrain_slot")) c.pretrain_slot = j.at("pretrain_slot").get<std::string>();
        if (j.contains("pretrain_epochs")) c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
        if (j.contains("pretrain_learning_rate"))
            c.pretrain_learning_rate = j.at("pretrain_learning_rate").get<double>();
        if (j.contains("batch_reduction")) {
            const auto r = j.at("batch_reduction").get<std::string>();
            if (r != "mean" && r != "sum")
                throw ConfigError("batch_reduction must be \"mean\" or \"sum\"");
            c.batch_mean = r == "mean";
        }
        if (j.contains("grad_clip_norm")) c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
        return c;
    }
};

struct EpochRecord {
    std::string phase = "main"; // "pretrain" for phase 1 of shared_pretrained
    std::size_t epoch = 0;
    double train_loss = 0;
    std::map<std::string, double> val_per_slot;
    double val_joint = 0;
    std::string best_checkpoint; // best-so-far path

    nlohmann::json to_json() const {
        return nlohmann::json{{"phase", phase},
                              {"epoch", epoch},
                              {"train_loss", train_loss},
                              {"val_per_slot_accuracy", val_per_slot},
                              {"val_joint_accuracy", val_joint},
                              {"best_checkpoint", best_checkpoint}};
    }
};

struct TrainingRunRecord {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // 0 when only the initial checkpoint exists
    double best_val_joint = -1;
    std::string best_checkpoint_path;
};

// Cross-entropy loss of one dialogue summed over its turns and the given
// slots, with the LSTM state threaded across turns so gradients flow through
// the whole dialogue. The user/act features are built once per turn and
// shared by every slot branch; slot features are built once per dialogue.
template <typename T>
ad::Node<T> dialogue_loss(const StateNetModel<T>& model, const Dialogue& dialogue,
                          const std::vector<std::string>& slots, const Ontology& ontology,
                          const EmbeddingTable<T>& table, const AliasMap* aliases = nullptr) {
    if (slots.empty()) throw ConfigError("dialogue_loss: no slots given");

    struct SlotWork {
        std::string name;
        ad::Node<T> feature;
        std::vector<ad::Node<T>> candidates;
        TrackerState<T> state;
    };
    std::vector<SlotWork> work;
    work.reserve(slots.size());
    for (const auto& slot : slots) {
        SlotWork w{slot,
                   slot_feature(model, table, slot, aliases),
                   value_nodes(value_vectors(table, ontology.values(slot), aliases)),
                   TrackerState<T>::initial(model.config)};
        work.push_back(std::move(w));
    }

    std::vector<ad::Node<T>> losses;
    losses.reserve(dialogue.turns.size() * slots.size());
    for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
        const Turn& turn = dialogue.turns[t];
        TurnContext<T> ctx = make_turn_context(model, turn, table);
        for (auto& w : work) {
            auto gold_it = turn.gold_goal.find(w.name);
            if (gold_it == turn.gold_goal.end())
                throw DataError("dialogue '" + dialogue.id + "' turn " + std::to_string(t) +
                                ": missing gold label for slot '" + w.name + "'");
            const std::size_t gold_index = ontology.value_index(w.name, gold_it->second);

            ad::Node<T> i_s = turn_feature(ctx.f_u, ctx.f_a, w.feature);
            auto [prediction, new_state] = predict_vector(model, i_s, w.state);
            w.state = new_state;
            ad::Node<T> logits = value_logits(prediction, w.candidates);
            losses.push_back(ad::softmax_cross_entropy(logits, gold_index));
        }
    }
    return ad::sum_vectors(losses);
}

// Shared plumbing for all three regimes: dialogue-batched loss, one optimizer
// step per batch, per-epoch validation, best-checkpoint selection on
// validation joint accuracy (ties keep the earlier epoch).
template <typename T>
class Trainer {
public:
    Trainer(const Corpus& train, const Corpus& validation, const EmbeddingTable<T>& table,
            ModelConfig model_config, std::string output_dir, const AliasMap* aliases = nullptr,
            std::function<void(const EpochRecord&)> on_epoch = nullptr)
        : train_(train),
          validation_(validation),
          table_(table),
          aliases_(aliases),
          model_config_(model_config),
          output_dir_(std::move(output_dir)),
          on_epoch_(std::move(on_epoch)) {
        vocabulary_ = ActVocabulary::build(train_.dialogues, model_config_.act_gram_order);
        model_config_.act_input_dim = vocabulary_.total_size();
        model_config_.embedding_dim = table_.dimension();
        model_config_.validate();
        std::filesystem::create_directories(output_dir_);
    }

    const ModelConfig& model_config() const { return model_config_; }
    const ActVocabulary& vocabulary() const { return vocabulary_; }

    // One independent model for one slot.
    TrainingRunRecord train_separate(const std::string& slot, TrainingConfig config) {
        config.finalize();
        config.validate();
        require_slot(slot);
        return run({slot}, config, nullptr, "best." + slot + ".ckpt", "main");
    }

    // One model, losses summed over all slots per batch.
    TrainingRunRecord train_shared(const std::vector<std::string>& slots, TrainingConfig config) {
        config.finalize();
        config.validate();
        for (const auto& s : slots) require_slot(s);
        return run(slots, config, nullptr, "best.ckpt", "main");
    }

    // Phase 1: shared training on the single pre-training slot with RMSProp;
    // phase 2: shared training on all slots initialized from phase 1's best
    // validation checkpoint.
    TrainingRunRecord pretrain_then_train(const std::vector<std::string>& slots,
                                          TrainingConfig config) {
        config.finalize();
        config.validate();
        for (const auto& s : slots) require_slot(s);
        if (std::find(slots.begin(), slots.end(), config.pretrain_slot) == slots.end())
            throw ConfigError("pretrain slot '" + config.pretrain_slot +
                              "' is not among the trained slots");

        TrainingConfig phase1 = config;
        phase1.optimizer = OptimizerKind::RmsProp;
        phase1.learning_rate = config.pretrain_learning_rate;
        phase1.epochs = *config.pretrain_epochs;
        TrainingRunRecord pre =
            run({config.pretrain_slot}, phase1, nullptr, "pretrain.best.ckpt", "pretrain");

        StateNetModel<T> warm = load_checkpoint<T>(pre.best_checkpoint_path);
        return run(slots, config, &warm.params, "best.ckpt", "main");
    }

private:
    void require_slot(const std::string& slot) const {
        if (!train_.ontology.has(slot))
            throw ConfigError("slot '" + slot + "' is not in the training ontology");
    }

    TrainingRunRecord run(const std::vector<std::string>& slots, const TrainingConfig& config,
                          const ad::ParameterSet<T>* init_params, const std::string& checkpoint_name,
                          const std::string& phase) {
        // Stream 0 initializes parameters, stream 1 drives the epoch shuffle;
        // both derive from the run seed alone, so regimes that share a seed
        // share every draw.
        Rng root(config.seed);
        Rng init_rng = root.fork(0);
        StateNetModel<T> model = StateNetModel<T>::init(model_config_, vocabulary_, init_rng);
        if (init_params) model.params.copy_values_from(*init_params);

        const std::string checkpoint_path =
            (std::filesystem::path(output_dir_) / checkpoint_name).string();

        TrainingRunRecord record;
        record.best_checkpoint_path = checkpoint_path;
        if (config.epochs == 0) {
            // Degenerate budget: the initial parameters are the best (and
            // only) checkpoint, which is what phase 2 of shared_pretrained
            // consumes when pre-training is disabled.
            save_checkpoint(checkpoint_path, model);
            return record;
        }

        Rng shuffle_rng = root.fork(1);
        std::vector<std::size_t> order(train_.dialogues.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        const T lr = static_cast<T>(config.learning_rate);
        for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            double loss_sum = 0;
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t end = std::min(order.size(), start + config.batch_size);
                std::vector<ad::Node<T>> losses;
                losses.reserve(end - start);
                for (std::size_t i = start; i < end; ++i)
                    losses.push_back(dialogue_loss(model, train_.dialogues[order[i]], slots,
                                                   train_.ontology, table_, aliases_));
                ad::Node<T> batch_sum = ad::sum_vectors(losses);
                loss_sum += static_cast<double>(batch_sum.value().data[0]);
                ad::Node<T> objective =
                    config.batch_mean ? ad::scale(batch_sum, T(1) / static_cast<T>(end - start))
                                      : batch_sum;
                model.params.zero_gradients();
                ad::backward(objective);
                if (config.grad_clip_norm > 0)
                    ad::clip_gradient_norm(model.params, static_cast<T>(config.grad_clip_norm));
                if (*config.optimizer == OptimizerKind::RmsProp)
                    ad::rmsprop_step(model.params, lr);
                else
                    ad::adam_step(model.params, lr);
            }

            EvalReport report = evaluate(validation_.dialogues, model, slots, validation_.ontology,
                                         table_, aliases_);
            if (report.joint_accuracy > record.best_val_joint) {
                record.best_val_joint = report.joint_accuracy;
                record.best_epoch = epoch;
                save_checkpoint(checkpoint_path, model);
            }

            EpochRecord rec;
            rec.phase = phase;
            rec.epoch = epoch;
            rec.train_loss = loss_sum / static_cast<double>(train_.dialogues.size());
            rec.val_per_slot = report.per_slot_accuracy;
            rec.val_joint = report.joint_accuracy;
            rec.best_checkpoint = checkpoint_path;
            if (on_epoch_) on_epoch_(rec);
            record.epochs.push_back(std::move(rec));
        }
        return record;
    }

    const Corpus& train_;
    const Corpus& validation_;
    const EmbeddingTable<T>& table_;
    const AliasMap* aliases_;
    ModelConfig model_config_;
    ActVocabulary vocabulary_;
    std::string output_dir_;
    std::function<void(const EpochRecord&)> on_epoch_;
};

} // namespace statenet
