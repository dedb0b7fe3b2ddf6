#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <statenet/model.hpp>
#include <statenet/training.hpp>

#include "support/gradcheck.hpp"
#include "support/toy_data.hpp"

using namespace statenet;
using Catch::Approx;

namespace {

// Miniature double-precision world shared by the model tests.
struct MiniWorld {
    toy::World<double> world;
    StateNetModel<double> model;
};

MiniWorld mini_world(std::uint64_t seed = 42) {
    toy::WorldConfig cfg;
    cfg.slot_count = 2;
    cfg.values_per_slot = 3;
    cfg.dialogue_count = 4;
    cfg.max_turns = 2;
    cfg.embedding_dim = 4;
    cfg.seed = seed;
    auto world = toy::world<double>(cfg);

    ModelConfig mc;
    mc.receptor_width = 3;
    mc.embedding_dim = 4;
    mc.utterance_gram_order = 2;
    mc.act_gram_order = 2;
    mc.receptors_per_gram = 2;
    mc.lstm_hidden = 3;
    auto vocab = ActVocabulary::build(world.corpus.dialogues, mc.act_gram_order);
    mc.act_input_dim = vocab.total_size();
    Rng rng(seed);
    auto model = StateNetModel<double>::init(mc, std::move(vocab), rng);
    return MiniWorld{std::move(world), std::move(model)};
}

} // namespace

TEST_CASE("parameter count matches the closed form and ignores the ontology") {
    auto mw = mini_world();
    CHECK(mw.model.params.scalar_count() == parameter_scalar_count(mw.model.config));

    // Tracking against value sets of different sizes touches no parameter.
    const std::size_t before = mw.model.params.scalar_count();
    auto state = TrackerState<double>::initial(mw.model.config);
    const auto& turn = mw.world.corpus.dialogues[0].turns[0];
    const auto& slot = mw.world.layout.slots[0];
    std::vector<std::string> small = mw.world.corpus.ontology.values(slot);
    std::vector<std::string> large = small;
    for (int i = 0; i < 50; ++i) large.push_back("extra" + std::to_string(i));
    track_turn(mw.model, turn, slot, small, state, mw.world.table);
    track_turn(mw.model, turn, slot, large, state, mw.world.table);
    CHECK(mw.model.params.scalar_count() == before);
}

TEST_CASE("user feature of an all-zero representation is the zero vector") {
    auto mw = mini_world();
    UtteranceRepresentation<double> rep;
    rep.max_gram = 2;
    rep.word_dim = 4;
    rep.per_gram = {std::vector<double>(4, 0.0), std::vector<double>(8, 0.0)};
    auto f_u = user_feature(mw.model, rep);
    REQUIRE(f_u.value().numel() == mw.model.config.receptor_width);
    for (double v : f_u.value().data) CHECK(v == Approx(0.0).margin(1e-12));
}

TEST_CASE("a single receptor reduces the user feature to one linear map per gram") {
    toy::WorldConfig wc;
    wc.slot_count = 2;
    wc.values_per_slot = 3;
    wc.dialogue_count = 2;
    wc.max_turns = 2;
    wc.embedding_dim = 4;
    wc.seed = 12;
    auto world = toy::world<double>(wc);
    ModelConfig mc;
    mc.receptor_width = 3;
    mc.embedding_dim = 4;
    mc.receptors_per_gram = 1;
    mc.act_gram_order = 2;
    mc.lstm_hidden = 3;
    auto vocab = ActVocabulary::build(world.corpus.dialogues, mc.act_gram_order);
    mc.act_input_dim = vocab.total_size();
    Rng rng(6);
    auto model = StateNetModel<double>::init(mc, vocab, rng);

    const auto hyps = prepared_hypotheses(world.corpus.dialogues[0].turns[0], 3);
    const auto rep = ngram_utterance_rep(weighted_word_vectors(hyps, world.table), 2, 4);
    auto via_model = user_feature(model, rep);

    // hand-composed equivalent: Linear(ReLU(LayerNorm(sum_k W_k r_k + b_k)))
    using ad::Node;
    std::vector<Node<double>> grams;
    for (std::size_t k = 1; k <= 2; ++k)
        grams.push_back(ad::linear(Node<double>::constant(ad::Array<double>::vector(rep.gram(k))),
                                   model.params.get(param_names::receptor_weight(k, 1)),
                                   model.params.get(param_names::receptor_bias(k, 1))));
    auto by_hand = ad::linear(
        ad::relu(ad::layer_norm(ad::sum_vectors(grams), model.params.get("norm.gain"),
                                model.params.get("norm.bias"))),
        model.params.get("user_out.weight"), model.params.get("user_out.bias"));
    CHECK(via_model.value().data == by_hand.value().data);
}

TEST_CASE("feature widths are fixed by the config, not the utterance or values") {
    auto mw = mini_world();
    for (const auto& d : mw.world.corpus.dialogues) {
        auto ctx = make_turn_context(mw.model, d.turns[0], mw.world.table);
        CHECK(ctx.f_u.value().numel() == mw.model.config.receptor_width);
        CHECK(ctx.f_a.value().numel() == mw.model.config.receptor_width);
    }
    auto f_s = slot_feature(mw.model, mw.world.table, mw.world.layout.slots[0]);
    CHECK(f_s.value().numel() == 2 * mw.model.config.receptor_width);
}

TEST_CASE("act feature is non-negative and zero for zero counts with zero bias") {
    auto mw = mini_world();
    for (const auto& d : mw.world.corpus.dialogues) {
        auto counts = act_representation<double>(d.turns[0], mw.model.vocabulary);
        auto f_a = act_feature(mw.model, counts);
        for (double v : f_a.value().data) CHECK(v >= 0.0);
    }
    // biases are zero-initialized, so zero counts give a zero feature
    std::vector<double> zeros(mw.model.config.act_input_dim, 0.0);
    auto zero_feature = act_feature(mw.model, zeros);
    for (double v : zero_feature.value().data) CHECK(v == Approx(0.0).margin(1e-12));
}

TEST_CASE("slots with identical phrase vectors produce identical features") {
    auto mw = mini_world();
    const auto vec = mw.world.table.phrase_vector(mw.world.layout.slots[0]);
    auto a = slot_feature(mw.model, vec);
    auto b = slot_feature(mw.model, vec);
    CHECK(a.value().data == b.value().data);
}

TEST_CASE("turn_feature gates the concatenated evidence") {
    using ad::Array;
    using ad::Node;
    auto ones = Node<double>::constant(Array<double>::full({4}, 1.0));
    auto f_u = Node<double>::constant(Array<double>::vector({1, 2}));
    auto f_a = Node<double>::constant(Array<double>::vector({3, 4}));

    // multiplicative identity
    CHECK(turn_feature(f_u, f_a, ones).value().data == std::vector<double>{1, 2, 3, 4});

    // annihilation
    auto zeros = Node<double>::constant(Array<double>::zeros({4}));
    CHECK(turn_feature(f_u, f_a, zeros).value().data == std::vector<double>{0, 0, 0, 0});

    // hand elementwise product
    auto twos = Node<double>::constant(Array<double>::full({4}, 2.0));
    CHECK(turn_feature(f_u, f_a, twos).value().data == std::vector<double>{2, 4, 6, 8});

    CHECK_THROWS_AS(turn_feature(f_u, f_a, f_u), ShapeError);
}

TEST_CASE("prediction vector is embedding-sized, non-negative, and state-dependent") {
    auto mw = mini_world();
    auto ctx = make_turn_context(mw.model, mw.world.corpus.dialogues[0].turns[0], mw.world.table);
    auto f_s = slot_feature(mw.model, mw.world.table, mw.world.layout.slots[0]);
    auto i_s = turn_feature(ctx.f_u, ctx.f_a, f_s);

    auto zero_state = TrackerState<double>::initial(mw.model.config);
    auto [o1, s1] = predict_vector(mw.model, i_s, zero_state);
    CHECK(o1.value().numel() == mw.model.config.embedding_dim);
    for (double v : o1.value().data) CHECK(v >= 0.0);

    // different prior state, same input: recurrence matters
    auto [o2, s2] = predict_vector(mw.model, i_s, s1);
    CHECK(o1.value().data != o2.value().data);
}

TEST_CASE("zeroed recurrence and output weights collapse the prediction to its bias") {
    auto mw = mini_world();
    for (const char* name : {"lstm.w_ih", "lstm.w_hh", "lstm.bias", "output.weight"}) {
        ad::Node<double> node = mw.model.params.get(name);
        node.value().fill(0.0);
    }
    ad::Node<double> bias = mw.model.params.get("output.bias");
    bias.value().data = {0.5, -0.25, 1.5, -2.0};

    auto ctx = make_turn_context(mw.model, mw.world.corpus.dialogues[0].turns[0], mw.world.table);
    auto f_s = slot_feature(mw.model, mw.world.table, mw.world.layout.slots[0]);
    auto i_s = turn_feature(ctx.f_u, ctx.f_a, f_s);

    Rng rng(9);
    for (int i = 0; i < 3; ++i) {
        TrackerState<double> state{gradcheck::leaf({3}, rng), gradcheck::leaf({3}, rng)};
        auto [o, _] = predict_vector(mw.model, i_s, state);
        CHECK(o.value().data == std::vector<double>{0.5, 0, 1.5, 0});
    }
}

TEST_CASE("value_distribution turns distances into probabilities") {
    using ad::Array;
    using ad::Node;
    auto prediction = Node<double>::constant(Array<double>::vector({0, 0}));

    // equidistant values split the mass
    {
        std::vector<std::vector<double>> vecs{{1, 0}, {0, 1}};
        auto dist = value_distribution(prediction, {"none", "a"}, vecs);
        CHECK(dist.probabilities[0] == Approx(0.5));
        CHECK(dist.probabilities[1] == Approx(0.5));
    }

    // scalar softmax by hand from distances 0 and 5: p = 1/(1+e^-5)
    {
        std::vector<std::vector<double>> vecs{{0, 0}, {3, 4}};
        auto dist = value_distribution(prediction, {"none", "far"}, vecs);
        CHECK(dist.probabilities[0] == Approx(1.0 / (1.0 + std::exp(-5.0))).epsilon(1e-4));
        CHECK(dist.probabilities[0] == Approx(0.99331).epsilon(1e-4));
    }

    // errors: empty set, missing "none"
    std::vector<std::vector<double>> one{{0, 0}};
    CHECK_THROWS_AS(value_distribution(prediction, {}, std::vector<std::vector<double>>{}),
                    DataError);
    CHECK_THROWS_AS(value_distribution(prediction, {"a"}, one), DataError);
}

TEST_CASE("appending a value renormalizes without reordering the existing ones") {
    using ad::Array;
    using ad::Node;
    auto prediction = Node<double>::constant(Array<double>::vector({0.2, 0.1}));
    std::vector<std::string> values{"none", "a", "b"};
    std::vector<std::vector<double>> vecs{{0, 0}, {1, 1}, {-2, 0.5}};
    auto before = value_distribution(prediction, values, vecs);

    values.push_back("newcomer");
    vecs.push_back({50, 50});
    auto after = value_distribution(prediction, values, vecs);

    // same relative order of the original values
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (before.probabilities[i] < before.probabilities[j])
                CHECK(after.probabilities[i] < after.probabilities[j]);
    double total = 0;
    for (double p : after.probabilities) total += p;
    CHECK(total == Approx(1.0).margin(1e-9));
}

TEST_CASE("distributions are valid and argmax ties break to the lowest index") {
    auto mw = mini_world();
    const auto& slot = mw.world.layout.slots[0];
    auto state = TrackerState<double>::initial(mw.model.config);
    const auto values = mw.world.corpus.ontology.values(slot);
    for (const auto& d : mw.world.corpus.dialogues) {
        for (const auto& turn : d.turns) {
            auto [dist, next] = track_turn(mw.model, turn, slot, values, state, mw.world.table);
            state = next;
            double total = 0;
            for (double p : dist.probabilities) {
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
                total += p;
            }
            CHECK(total == Approx(1.0).margin(1e-6));
        }
    }

    SlotDistribution<double> tie{{"none", "x", "y"}, {0.4, 0.4, 0.2}};
    CHECK(tie.argmax() == 0);
    SlotDistribution<double> tie2{{"none", "x", "y"}, {0.2, 0.4, 0.4}};
    CHECK(tie2.argmax() == 1);
}

TEST_CASE("permuting the value set permutes the distribution identically") {
    auto mw = mini_world();
    const auto& slot = mw.world.layout.slots[1];
    const auto& turn = mw.world.corpus.dialogues[1].turns[0];
    auto state = TrackerState<double>::initial(mw.model.config);

    std::vector<std::string> values = mw.world.corpus.ontology.values(slot);
    auto [dist, s1] = track_turn(mw.model, turn, slot, values, state, mw.world.table);

    std::vector<std::string> permuted{values[2], values[0], values[1]};
    auto [dist2, s2] = track_turn(mw.model, turn, slot, permuted, state, mw.world.table);

    CHECK(dist2.probabilities[0] == Approx(dist.probabilities[2]));
    CHECK(dist2.probabilities[1] == Approx(dist.probabilities[0]));
    CHECK(dist2.probabilities[2] == Approx(dist.probabilities[1]));
}

TEST_CASE("slots sharing a phrase vector share distributions under shared parameters") {
    auto mw = mini_world();
    // "colour" is absent from the table but aliased onto the first slot's
    // name, so the two distinct slot names resolve to the same phrase vector
    // and must be indistinguishable to the shared model.
    const auto& real_slot = mw.world.layout.slots[0];
    AliasMap aliases{{"colour", real_slot}};

    const auto& turn = mw.world.corpus.dialogues[0].turns[0];
    const auto values = mw.world.corpus.ontology.values(real_slot);
    auto state = TrackerState<double>::initial(mw.model.config);

    auto [a, sa] = track_turn(mw.model, turn, real_slot, values, state, mw.world.table, &aliases);
    auto [b, sb] = track_turn(mw.model, turn, "colour", values, state, mw.world.table, &aliases);
    CHECK(a.probabilities == b.probabilities);
}

TEST_CASE("user and act features are slot-independent within a turn") {
    auto mw = mini_world();
    const auto& turn = mw.world.corpus.dialogues[2].turns[0];
    auto ctx1 = make_turn_context(mw.model, turn, mw.world.table);
    auto ctx2 = make_turn_context(mw.model, turn, mw.world.table);
    CHECK(ctx1.f_u.value().data == ctx2.f_u.value().data);
    CHECK(ctx1.f_a.value().data == ctx2.f_a.value().data);
}

TEST_CASE("full-model gradients match finite differences on a two-turn dialogue") {
    auto mw = mini_world(7);
    // ensure the dialogue has two turns
    Dialogue dialogue = mw.world.corpus.dialogues[0];
    while (dialogue.turns.size() < 2) dialogue.turns.push_back(dialogue.turns[0]);
    dialogue.turns.resize(2);

    std::vector<ad::Node<double>> leaves;
    for (auto& e : mw.model.params.entries()) leaves.push_back(e.node);
    // continuous values everywhere keep the loss differentiable at the
    // evaluation point (finite differences are meaningless at a ReLU kink)
    Rng rng(70);
    gradcheck::randomize_leaves(leaves, rng);

    auto result = gradcheck::check_gradients(leaves, [&] {
        return dialogue_loss(mw.model, dialogue, mw.world.layout.slots, mw.world.corpus.ontology,
                             mw.world.table);
    });
    INFO(result.first_failure);
    CHECK(result.checked == mw.model.params.scalar_count());
    CHECK(result.ok());
}
