#include "doctest.h"

#include <algorithm>
#include <stdexcept>

#include "vulnscore/features.hpp"
#include "vulnscore/synthetic.hpp"

using namespace vulnscore;

TEST_CASE("default corpus has the 50/25 shape") {
    const auto d = generate_corpus(1);
    CHECK(d.instances.size() == 75);
    CHECK(d.count(Label::Vulnerable) == 50);
    CHECK(d.count(Label::BenignFlaw) == 25);
    CHECK(validate_dataset(d).empty());
    CHECK(d.instances.front().id == "syn-0001");
    CHECK(d.instances.front().provenance.at("generator") == "synthetic-corpus");
    CHECK(recorded_informative_features(d) == informative_l3_features());
}

TEST_CASE("scaled corpora keep the 2:1 ratio") {
    SynthOptions opt;
    opt.instances = 10;
    CHECK(synth_vulnerable_count(opt) == 7);
    const auto d = generate_corpus(3, opt);
    CHECK(d.instances.size() == 10);
    CHECK(d.count(Label::Vulnerable) == 7);
    opt.instances = 3;
    CHECK(synth_vulnerable_count(opt) == 2);
}

TEST_CASE("generation is deterministic per seed") {
    CHECK(generate_corpus(11) == generate_corpus(11));
    CHECK_FALSE(generate_corpus(11) == generate_corpus(12));
    CHECK(generate_planted_linear(4) == generate_planted_linear(4));
}

TEST_CASE("negative control records no planted features") {
    SynthOptions opt;
    opt.informative_l3 = false;
    const auto d = generate_corpus(2, opt);
    CHECK(recorded_informative_features(d).empty());
    CHECK(validate_dataset(d).empty());
}

TEST_CASE("label shuffling permutes the labels only") {
    SynthOptions opt;
    opt.shuffle_labels = true;
    const auto plain = generate_corpus(6);
    const auto mixed = generate_corpus(6, opt);
    CHECK(mixed.count(Label::Vulnerable) == plain.count(Label::Vulnerable));
    std::size_t moved = 0;
    for (std::size_t i = 0; i < plain.instances.size(); ++i) {
        CHECK(mixed.instances[i].features == plain.instances[i].features);
        moved += mixed.instances[i].label != plain.instances[i].label;
        CHECK(mixed.instances[i].provenance.at("labels") == "shuffled");
    }
    CHECK(moved > 0);
}

TEST_CASE("layer-3 values go missing at roughly the configured rate") {
    SynthOptions opt;
    opt.instances = 400;
    opt.l3_missing_rate = 0.25;
    const auto d = generate_corpus(9, opt);
    std::size_t missing = 0, total = 0;
    for (const auto& inst : d.instances)
        for (const auto& f : d.dictionary) {
            if (f.layer == Layer::L3) {
                ++total;
                missing += !inst.features.contains(f.name);
            } else {
                CHECK(inst.features.contains(f.name));
            }
        }
    const double rate = static_cast<double>(missing) / static_cast<double>(total);
    CHECK(rate > 0.2);
    CHECK(rate < 0.3);
}

TEST_CASE("planted informative features carry the signal") {
    const auto d = generate_corpus(5);
    double mean_pos = 0, mean_neg = 0;
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& inst : d.instances) {
        const auto v = inst.features.get("l3.security_related");
        if (!v)
            continue;
        (inst.label == Label::Vulnerable ? mean_pos : mean_neg) += *v;
        ++(inst.label == Label::Vulnerable ? n_pos : n_neg);
    }
    CHECK(mean_pos / static_cast<double>(n_pos) > mean_neg / static_cast<double>(n_neg) + 0.3);
}

TEST_CASE("planted linear labels follow the informative sum") {
    PlantedOptions opt;
    opt.label_noise = 0.0;
    const auto d = generate_planted_linear(8, opt);
    CHECK(d.dictionary.size() == 20);
    CHECK(d.instances.size() == 200);
    const auto planted = recorded_informative_features(d);
    REQUIRE(planted.size() == 5);
    for (const auto& inst : d.instances) {
        double s = 0;
        for (const auto& name : planted)
            s += *inst.features.get(name);
        CHECK((s >= 0) == (inst.label == Label::Vulnerable));
    }
}

TEST_CASE("invalid generator options") {
    SynthOptions opt;
    opt.instances = 1;
    CHECK_THROWS_AS(generate_corpus(1, opt), std::invalid_argument);
    opt.instances = 10;
    opt.vulnerable_fraction = 1.0;
    CHECK_THROWS_AS(generate_corpus(1, opt), std::invalid_argument);
    opt.vulnerable_fraction = 0.5;
    opt.l3_missing_rate = 1.0;
    CHECK_THROWS_AS(generate_corpus(1, opt), std::invalid_argument);
    PlantedOptions p;
    p.informative = p.noise = 0;
    CHECK_THROWS_AS(generate_planted_linear(1, p), std::invalid_argument);
}
