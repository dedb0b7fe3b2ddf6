// Command-line entry points for the StateNet tracker: train, evaluate, track,
// inspect-checkpoint. All outputs are line-delimited JSON; errors go to
// stderr as a single JSON line. Exit codes: 0 success, 1 runtime failure,
// 2 usage/config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <statenet/statenet.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace statenet;

namespace {

struct CommonArgs {
    std::string corpus_path;
    std::string embeddings_path;
    std::string aliases_path;
    std::string ontology_path;
    std::string values_override_path;
    std::vector<std::string> slots;
    std::string out_path;
};

struct TrainArgs {
    CommonArgs common;
    std::string config_path;
    std::string val_corpus_path;
    std::string regime;
    std::string pretrain_slot;
    std::optional<std::uint64_t> seed;
};

struct EvalArgs {
    CommonArgs common;
    std::vector<std::string> checkpoints; // "path" or "slot=path"
    std::string per_turn_csv;
};

struct TrackArgs {
    CommonArgs common;
    std::string checkpoint;
};

json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw DataError(std::string("cannot open ") + what + ": " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw DataError(std::string(what) + " " + path + " is not valid JSON: " + e.what());
    }
}

std::uint64_t env_seed() {
    if (const char* env = std::getenv("STATENET_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw ConfigError("STATENET_SEED is not an unsigned integer: " + std::string(env));
        }
    }
    return 0;
}

// Training config file: top-level TrainingConfig fields, plus the reserved
// keys "model" (ModelConfig fields) and "aliases" (alias file path).
void check_config_keys(const json& j) {
    static const std::set<std::string> known = {
        "regime",          "optimizer",      "learning_rate",
        "batch_size",      "epochs",         "seed",
        "pretrain_slot",   "pretrain_epochs", "pretrain_learning_rate",
        "batch_reduction", "grad_clip_norm", "model",
        "aliases"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config field \"" + key + "\"");
}

Ontology resolve_ontology(const Corpus& corpus, const CommonArgs& args) {
    Ontology ontology = corpus.ontology;
    if (!args.ontology_path.empty())
        ontology = Ontology::from_json(load_json_file(args.ontology_path, "ontology file"));
    if (!args.values_override_path.empty()) {
        const json j = load_json_file(args.values_override_path, "values override file");
        if (!j.is_object()) throw DataError("values override must be a JSON object of slot -> values");
        for (const auto& [slot, values] : j.items())
            ontology.set_slot(slot, values.get<std::vector<std::string>>());
    }
    return ontology;
}

std::vector<std::string> resolve_slots(const Ontology& ontology, const std::vector<std::string>& requested) {
    if (requested.empty()) return ontology.slot_names();
    for (const auto& s : requested)
        if (!ontology.has(s)) throw ConfigError("requested slot '" + s + "' is not in the ontology");
    return requested;
}

int cmd_train(const TrainArgs& args) {
    json config_json = json::object();
    if (!args.config_path.empty()) {
        config_json = load_json_file(args.config_path, "config file");
        check_config_keys(config_json);
    }

    TrainingConfig training = TrainingConfig::from_json(config_json);
    if (!args.regime.empty()) training.regime = regime_from_string(args.regime);
    if (!args.pretrain_slot.empty()) training.pretrain_slot = args.pretrain_slot;
    if (args.seed)
        training.seed = *args.seed;
    else if (!config_json.contains("seed"))
        training.seed = env_seed();
    training.finalize();
    training.validate();

    ModelConfig model_config;
    if (config_json.contains("model")) model_config = ModelConfig::from_json(config_json.at("model"));

    std::string aliases_path = args.common.aliases_path;
    if (aliases_path.empty() && config_json.contains("aliases"))
        aliases_path = config_json.at("aliases").get<std::string>();

    const Corpus train_corpus = load_corpus(args.common.corpus_path);
    const std::string val_path =
        args.val_corpus_path.empty() ? args.common.corpus_path : args.val_corpus_path;
    const Corpus val_corpus = val_path == args.common.corpus_path ? train_corpus : load_corpus(val_path);

    const auto table = EmbeddingTable<Real>::load(args.common.embeddings_path);
    AliasMap aliases;
    const AliasMap* aliases_ptr = nullptr;
    if (!aliases_path.empty()) {
        aliases = load_alias_file(aliases_path);
        aliases_ptr = &aliases;
    }

    const std::vector<std::string> slots = resolve_slots(train_corpus.ontology, args.common.slots);
    const std::string out_dir = args.common.out_path.empty() ? "run" : args.common.out_path;
    fs::create_directories(out_dir);

    std::ofstream record_file(fs::path(out_dir) / "record.jsonl");
    if (!record_file) throw DataError("cannot write run record in " + out_dir);
    std::string current_slot; // set per separate-regime run
    auto on_epoch = [&record_file, &current_slot](const EpochRecord& rec) {
        json line = rec.to_json();
        if (!current_slot.empty()) line["slot"] = current_slot;
        record_file << line.dump() << "\n";
        record_file.flush();
    };

    Trainer<Real> trainer(train_corpus, val_corpus, table, model_config, out_dir, aliases_ptr,
                          on_epoch);

    // The manifest pins everything needed to reproduce the run; written
    // before any training step.
    json manifest{{"model", trainer.model_config().to_json()},
                  {"training", training.to_json()},
                  {"corpus", args.common.corpus_path},
                  {"val_corpus", val_path},
                  {"embeddings", args.common.embeddings_path},
                  {"aliases", aliases_path},
                  {"slots", slots},
                  {"seed", training.seed},
                  {"output_dir", out_dir},
                  {"precision_bytes", sizeof(Real)}};
    {
        std::ofstream mf(fs::path(out_dir) / "manifest.json");
        mf << manifest.dump(2) << "\n";
        if (!mf) throw DataError("cannot write manifest in " + out_dir);
    }

    switch (training.regime) {
        case Regime::Separate: {
            for (const auto& slot : slots) {
                current_slot = slot;
                TrainingRunRecord rec = trainer.train_separate(slot, training);
                json summary{{"regime", "separate"},
                             {"slot", slot},
                             {"best_epoch", rec.best_epoch},
                             {"best_val_joint_accuracy", rec.best_val_joint},
                             {"checkpoint", rec.best_checkpoint_path}};
                std::cout << summary.dump() << "\n";
            }
            break;
        }
        case Regime::Shared: {
            TrainingRunRecord rec = trainer.train_shared(slots, training);
            json summary{{"regime", "shared"},
                         {"slots", slots},
                         {"best_epoch", rec.best_epoch},
                         {"best_val_joint_accuracy", rec.best_val_joint},
                         {"checkpoint", rec.best_checkpoint_path}};
            std::cout << summary.dump() << "\n";
            break;
        }
        case Regime::SharedPretrained: {
            TrainingRunRecord rec = trainer.pretrain_then_train(slots, training);
            json summary{{"regime", "shared_pretrained"},
                         {"slots", slots},
                         {"pretrain_slot", training.pretrain_slot},
                         {"best_epoch", rec.best_epoch},
                         {"best_val_joint_accuracy", rec.best_val_joint},
                         {"checkpoint", rec.best_checkpoint_path}};
            std::cout << summary.dump() << "\n";
            break;
        }
    }
    return 0;
}

std::map<std::string, StateNetModel<Real>> load_checkpoint_args(const std::vector<std::string>& specs) {
    std::map<std::string, StateNetModel<Real>> models; // "" key = shared for all slots
    for (const auto& spec : specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            if (specs.size() > 1)
                throw ConfigError("plain --checkpoint cannot be mixed with slot=path form");
            models.emplace("", load_checkpoint<Real>(spec));
        } else {
            const std::string slot = spec.substr(0, eq);
            const std::string path = spec.substr(eq + 1);
            if (slot.empty() || path.empty())
                throw ConfigError("bad --checkpoint '" + spec + "', expected slot=path");
            if (!models.emplace(slot, load_checkpoint<Real>(path)).second)
                throw ConfigError("duplicate --checkpoint for slot '" + slot + "'");
        }
    }
    if (models.empty()) throw ConfigError("at least one --checkpoint is required");
    return models;
}

int cmd_evaluate(const EvalArgs& args) {
    auto models = load_checkpoint_args(args.checkpoints);
    const Corpus corpus = load_corpus(args.common.corpus_path);
    const Ontology ontology = resolve_ontology(corpus, args.common);
    const auto table = EmbeddingTable<Real>::load(args.common.embeddings_path);
    AliasMap aliases;
    const AliasMap* aliases_ptr = nullptr;
    if (!args.common.aliases_path.empty()) {
        aliases = load_alias_file(args.common.aliases_path);
        aliases_ptr = &aliases;
    }

    SlotModels<Real> slot_models;
    if (models.count("")) {
        for (const auto& slot : resolve_slots(ontology, args.common.slots))
            slot_models[slot] = &models.at("");
    } else {
        std::vector<std::string> slots = args.common.slots;
        if (slots.empty())
            for (const auto& [slot, _] : models) slots.push_back(slot);
        for (const auto& slot : slots) {
            if (!models.count(slot))
                throw ConfigError("no checkpoint given for slot '" + slot + "'");
            if (!ontology.has(slot)) throw ConfigError("slot '" + slot + "' is not in the ontology");
            slot_models[slot] = &models.at(slot);
        }
    }

    EvalOptions options;
    std::ofstream csv;
    if (!args.per_turn_csv.empty()) {
        csv.open(args.per_turn_csv);
        if (!csv) throw DataError("cannot write per-turn csv: " + args.per_turn_csv);
        csv << "dialogue,turn,slot,gold,predicted,probability\n";
        options.per_turn = [&csv](const PerTurnRecord& r) {
            csv << r.dialogue_id << ',' << r.turn_index << ',' << r.slot << ',' << r.gold << ','
                << r.predicted << ',' << r.probability << "\n";
        };
    }
    options.per_dialogue_breakdown = false;

    const EvalReport report =
        evaluate(corpus.dialogues, slot_models, ontology, table, aliases_ptr, options);

    const std::string line = report.to_json().dump();
    if (args.common.out_path.empty()) {
        std::cout << line << "\n";
    } else {
        std::ofstream out(args.common.out_path);
        out << line << "\n";
        if (!out) throw DataError("cannot write report: " + args.common.out_path);
    }
    return 0;
}

int cmd_track(const TrackArgs& args) {
    const StateNetModel<Real> model = load_checkpoint<Real>(args.checkpoint);
    const Corpus corpus = load_corpus(args.common.corpus_path);
    const Ontology ontology = resolve_ontology(corpus, args.common);
    const auto table = EmbeddingTable<Real>::load(args.common.embeddings_path);
    AliasMap aliases;
    const AliasMap* aliases_ptr = nullptr;
    if (!args.common.aliases_path.empty()) {
        aliases = load_alias_file(args.common.aliases_path);
        aliases_ptr = &aliases;
    }
    const std::vector<std::string> slots = resolve_slots(ontology, args.common.slots);

    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!args.common.out_path.empty()) {
        out_file.open(args.common.out_path);
        if (!out_file) throw DataError("cannot write track output: " + args.common.out_path);
        out = &out_file;
    }

    ad::NoGradGuard no_grad;

    // slot features and candidate vectors are corpus-independent
    std::map<std::string, ad::Node<Real>> slot_features;
    std::map<std::string, std::vector<ad::Node<Real>>> candidates;
    for (const auto& slot : slots) {
        slot_features.emplace(slot, slot_feature(model, table, slot, aliases_ptr));
        candidates.emplace(slot,
                           value_nodes(value_vectors(table, ontology.values(slot), aliases_ptr)));
    }

    for (const auto& dialogue : corpus.dialogues) {
        std::map<std::string, TrackerState<Real>> states;
        for (const auto& slot : slots) states.emplace(slot, TrackerState<Real>::initial(model.config));
        for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
            const TurnContext<Real> ctx = make_turn_context(model, dialogue.turns[t], table);
            for (const auto& slot : slots) {
                ad::Node<Real> i_s = turn_feature(ctx.f_u, ctx.f_a, slot_features.at(slot));
                auto [prediction, new_state] = predict_vector(model, i_s, states.at(slot));
                states.at(slot) = new_state;
                auto dist = value_distribution(prediction, ontology.values(slot),
                                               candidates.at(slot));
                json line{{"dialogue", dialogue.id},
                          {"turn", t},
                          {"slot", slot},
                          {"values", dist.values},
                          {"probabilities", dist.probabilities},
                          {"predicted", dist.predicted()}};
                (*out) << line.dump() << "\n";
            }
        }
    }
    if (!*out) throw DataError("track: write failed");
    return 0;
}

int cmd_inspect(const std::string& checkpoint) {
    std::cout << checkpoint_summary(checkpoint).dump() << "\n";
    return 0;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool need_corpus = true) {
    cmd->add_option("--corpus", args.corpus_path, "corpus JSON file")->required(need_corpus);
    cmd->add_option("--embeddings", args.embeddings_path, "word-vector text file")->required();
    cmd->add_option("--aliases", args.aliases_path, "slot-token alias file (token<TAB>phrase)");
    cmd->add_option("--ontology", args.ontology_path, "ontology JSON overriding the corpus ontology");
    cmd->add_option("--values-override", args.values_override_path,
                    "JSON object slot -> value list replacing those slots' value sets");
    cmd->add_option("--slots", args.slots, "slots to track (default: all ontology slots)");
    cmd->add_option("--out", args.out_path, "output path (train: directory; others: file)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"StateNet universal dialogue state tracker"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a tracker and keep the best checkpoint");
    add_common(train, train_args.common);
    train->add_option("--config", train_args.config_path, "training config JSON");
    train->add_option("--val-corpus", train_args.val_corpus_path,
                      "validation corpus (default: the training corpus)");
    train->add_option("--regime", train_args.regime, "separate|shared|shared_pretrained");
    train->add_option("--pretrain-slot", train_args.pretrain_slot, "slot for phase-1 pre-training");
    std::uint64_t seed_flag = 0;
    auto* seed_opt = train->add_option("--seed", seed_flag, "run seed (default: $STATENET_SEED or 0)");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a labeled corpus");
    add_common(eval, eval_args.common);
    eval->add_option("--checkpoint", eval_args.checkpoints,
                     "checkpoint path, or slot=path (repeatable) for per-slot models")
        ->required();
    eval->add_option("--per-turn-csv", eval_args.per_turn_csv, "write per-turn predictions CSV here");

    TrackArgs track_args;
    auto* track = app.add_subcommand("track", "stream per-turn value distributions as JSON lines");
    add_common(track, track_args.common);
    track->add_option("--checkpoint", track_args.checkpoint, "checkpoint path")->required();

    std::string inspect_path;
    auto* inspect = app.add_subcommand("inspect-checkpoint", "print a checkpoint summary");
    inspect->add_option("--checkpoint", inspect_path, "checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (seed_opt->count()) train_args.seed = seed_flag;
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_evaluate(eval_args);
        if (track->parsed()) return cmd_track(track_args);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
    } catch (const ConfigError& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "config"}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"kind", "runtime"}}.dump() << "\n";
        return 1;
    }
    return 2;
}
