#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include <statenet/statenet.hpp>

#include "support/toy_data.hpp"

using nlohmann::json;
using namespace statenet;
using Catch::Approx;

namespace {

namespace fsys = std::filesystem;

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args, bool merge_stderr = true,
                  const std::string& env_prefix = "") {
    const std::string cmd = (env_prefix.empty() ? "" : env_prefix + " ") +
                            std::string(STATENET_CLI_PATH) + " " + args +
                            (merge_stderr ? " 2>&1" : " 2>/dev/null");
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buffer[4096];
    std::size_t n;
    while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.output.append(buffer, n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

// One shared fixture directory with a toy corpus, embeddings, and config.
struct Fixtures {
    fsys::path dir;
    std::string corpus;
    std::string single_turn_corpus;
    std::string embeddings;
    std::string config;
    std::vector<std::string> slots;

    Fixtures() {
        dir = fsys::temp_directory_path() / "statenet_cli_fixtures";
        fsys::remove_all(dir);
        fsys::create_directories(dir);

        toy::WorldConfig wc;
        wc.slot_count = 3;
        wc.values_per_slot = 3;
        wc.dialogue_count = 6;
        wc.max_turns = 2;
        wc.embedding_dim = 10;
        wc.seed = 19;
        auto world = toy::world<float>(wc);
        slots = world.layout.slots;

        corpus = (dir / "corpus.json").string();
        std::ofstream(corpus) << toy::corpus_to_json(world.corpus).dump(1) << "\n";

        Corpus single;
        single.ontology = world.corpus.ontology;
        Dialogue d = world.corpus.dialogues[0];
        d.turns.resize(1);
        single.dialogues.push_back(d);
        single_turn_corpus = (dir / "single_turn.json").string();
        std::ofstream(single_turn_corpus) << toy::corpus_to_json(single).dump(1) << "\n";

        embeddings = (dir / "embeddings.txt").string();
        toy::write_embeddings_file(embeddings, world.table, world.layout);

        config = (dir / "config.json").string();
        std::ofstream(config) << json{{"epochs", 2},
                                      {"batch_size", 4},
                                      {"optimizer", "adam"},
                                      {"learning_rate", 0.01},
                                      {"seed", 5},
                                      {"model",
                                       {{"receptor_width", 8},
                                        {"receptors_per_gram", 2},
                                        {"act_gram_order", 2},
                                        {"lstm_hidden", 10}}}}
                                     .dump(1)
                              << "\n";
    }
};

const Fixtures& fixtures() {
    static Fixtures f;
    return f;
}

std::string train_run_dir(const std::string& tag) {
    const auto out = fixtures().dir / ("run_" + tag);
    fsys::remove_all(out);
    return out.string();
}

// Trains once and reuses the artifacts across the read-only CLI tests.
const std::string& trained_run() {
    static std::string dir = [] {
        const auto& f = fixtures();
        const std::string out = train_run_dir("main");
        auto r = run_cli("train --corpus " + f.corpus + " --embeddings " + f.embeddings +
                         " --config " + f.config + " --out " + out);
        REQUIRE(r.exit_code == 0);
        return out;
    }();
    return dir;
}

} // namespace

TEST_CASE("train without --embeddings is a usage error") {
    auto r = run_cli("train --corpus " + fixtures().corpus);
    CHECK(r.exit_code == 2);
}

TEST_CASE("a full toy training run writes loadable artifacts") {
    const std::string out = trained_run();
    const auto& f = fixtures();

    CHECK(fsys::exists(fsys::path(out) / "manifest.json"));
    CHECK(fsys::exists(fsys::path(out) / "best.ckpt"));

    // the checkpoint loads and matches the manifest's model config
    auto model = load_checkpoint<Real>((fsys::path(out) / "best.ckpt").string());
    json manifest;
    std::ifstream(fsys::path(out) / "manifest.json") >> manifest;
    CHECK(model.config == ModelConfig::from_json(manifest.at("model")));
    CHECK(manifest.at("seed") == 5);
    CHECK(manifest.at("embeddings") == f.embeddings);

    // one record line per epoch
    std::ifstream rec(fsys::path(out) / "record.jsonl");
    std::string all((std::istreambuf_iterator<char>(rec)), std::istreambuf_iterator<char>());
    CHECK(lines_of(all).size() == 2);
    for (const auto& line : lines_of(all)) CHECK_NOTHROW(json::parse(line));
}

TEST_CASE("shared_pretrained without --pretrain-slot is a config error naming the field") {
    const auto& f = fixtures();
    auto r = run_cli("train --corpus " + f.corpus + " --embeddings " + f.embeddings +
                     " --config " + f.config + " --regime shared_pretrained --out " +
                     train_run_dir("nopretrain"));
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("pretrain_slot") != std::string::npos);
}

TEST_CASE("track emits one distribution line per slot per turn") {
    const auto& f = fixtures();
    const std::string ckpt = (fsys::path(trained_run()) / "best.ckpt").string();
    auto r = run_cli("track --checkpoint " + ckpt + " --corpus " + f.single_turn_corpus +
                         " --embeddings " + f.embeddings,
                     false);
    REQUIRE(r.exit_code == 0);
    auto lines = lines_of(r.output);
    REQUIRE(lines.size() == f.slots.size()); // one turn

    for (const auto& line : lines) {
        json j = json::parse(line);
        double total = 0;
        for (double p : j.at("probabilities").get<std::vector<double>>()) total += p;
        CHECK(total == Approx(1.0).margin(1e-6));
        CHECK(j.at("turn") == 0);
    }

    // byte-identical on a second run
    auto again = run_cli("track --checkpoint " + ckpt + " --corpus " + f.single_turn_corpus +
                             " --embeddings " + f.embeddings,
                         false);
    CHECK(again.output == r.output);
}

TEST_CASE("evaluate prints a report whose joint accuracy respects the conjunction bound") {
    const auto& f = fixtures();
    const std::string ckpt = (fsys::path(trained_run()) / "best.ckpt").string();
    auto r = run_cli("evaluate --checkpoint " + ckpt + " --corpus " + f.corpus +
                         " --embeddings " + f.embeddings,
                     false);
    REQUIRE(r.exit_code == 0);
    json report = json::parse(r.output);
    for (const auto& [slot, acc] : report.at("per_slot_accuracy").items())
        CHECK(report.at("joint_accuracy").get<double>() <= acc.get<double>() + 1e-12);

    // identical rerun: evaluation is reproducible byte for byte
    auto again = run_cli("evaluate --checkpoint " + ckpt + " --corpus " + f.corpus +
                             " --embeddings " + f.embeddings,
                         false);
    CHECK(again.output == r.output);
}

TEST_CASE("evaluate can dump one CSV row per turn and slot") {
    const auto& f = fixtures();
    const std::string ckpt = (fsys::path(trained_run()) / "best.ckpt").string();
    const std::string csv_path = (fixtures().dir / "turns.csv").string();
    auto r = run_cli("evaluate --checkpoint " + ckpt + " --corpus " + f.single_turn_corpus +
                         " --embeddings " + f.embeddings + " --per-turn-csv " + csv_path,
                     false);
    REQUIRE(r.exit_code == 0);
    std::ifstream csv(csv_path);
    std::string all((std::istreambuf_iterator<char>(csv)), std::istreambuf_iterator<char>());
    auto rows = lines_of(all);
    REQUIRE(rows.size() == 1 + f.slots.size()); // header + one turn x slots
    CHECK(rows[0] == "dialogue,turn,slot,gold,predicted,probability");
}

TEST_CASE("evaluate honors a values override file") {
    const auto& f = fixtures();
    const std::string ckpt = (fsys::path(trained_run()) / "best.ckpt").string();

    // swap one slot's value set for a superset with an extra (OOV) candidate
    auto model = load_checkpoint<Real>(ckpt);
    Corpus corpus = load_corpus(f.corpus);
    auto values = corpus.ontology.values(f.slots[0]);
    values.push_back("mystery");
    const std::string override_path = (fixtures().dir / "override.json").string();
    std::ofstream(override_path) << json{{f.slots[0], values}}.dump() << "\n";

    auto r = run_cli("evaluate --checkpoint " + ckpt + " --corpus " + f.corpus +
                         " --embeddings " + f.embeddings + " --values-override " + override_path,
                     false);
    REQUIRE(r.exit_code == 0);
    CHECK_NOTHROW(json::parse(r.output));
}

TEST_CASE("a malformed corpus is reported with dialogue and turn") {
    const auto& f = fixtures();
    const std::string bad = (fixtures().dir / "bad_corpus.json").string();
    std::ofstream(bad) << R"({"ontology": {"food": ["none"]},
                              "dialogues": [{"id": "bad-dlg", "turns": [{"asr": []}]}]})";
    const std::string ckpt = (fsys::path(trained_run()) / "best.ckpt").string();
    auto r = run_cli("evaluate --checkpoint " + ckpt + " --corpus " + bad + " --embeddings " +
                     f.embeddings);
    CHECK(r.exit_code == 1);
    CHECK(r.output.find("bad-dlg") != std::string::npos);
    CHECK(r.output.find("turn 0") != std::string::npos);
}

TEST_CASE("inspect-checkpoint summarizes the parameter table") {
    const std::string ckpt = (fsys::path(trained_run()) / "best.ckpt").string();
    auto r = run_cli("inspect-checkpoint --checkpoint " + ckpt, false);
    REQUIRE(r.exit_code == 0);
    json summary = json::parse(r.output);
    auto model = load_checkpoint<Real>(ckpt);
    CHECK(summary.at("total_parameter_count") == model.params.scalar_count());
    CHECK(summary.at("precision_bytes") == sizeof(Real));
}

TEST_CASE("STATENET_SEED supplies the default seed") {
    const auto& f = fixtures();
    // a config without a seed field
    const std::string cfg = (fixtures().dir / "config_noseed.json").string();
    std::ofstream(cfg) << json{{"epochs", 1},
                               {"batch_size", 4},
                               {"optimizer", "adam"},
                               {"learning_rate", 0.01},
                               {"model",
                                {{"receptor_width", 8},
                                 {"receptors_per_gram", 2},
                                 {"act_gram_order", 2},
                                 {"lstm_hidden", 10}}}}
                              .dump()
                       << "\n";
    const std::string out = train_run_dir("envseed");
    auto r = run_cli("train --corpus " + f.corpus + " --embeddings " + f.embeddings + " --config " +
                         cfg + " --out " + out,
                     true, "STATENET_SEED=777");
    REQUIRE(r.exit_code == 0);
    json manifest;
    std::ifstream(fsys::path(out) / "manifest.json") >> manifest;
    CHECK(manifest.at("seed") == 777);
}

TEST_CASE("the manifest pins everything needed to reproduce an evaluation") {
    const std::string out = trained_run();
    json manifest;
    std::ifstream(fsys::path(out) / "manifest.json") >> manifest;

    const std::string cmd = "evaluate --checkpoint " + (fsys::path(out) / "best.ckpt").string() +
                            " --corpus " + manifest.at("val_corpus").get<std::string>() +
                            " --embeddings " + manifest.at("embeddings").get<std::string>();
    auto a = run_cli(cmd, false);
    auto b = run_cli(cmd, false);
    REQUIRE(a.exit_code == 0);
    CHECK(a.output == b.output);
}
