#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "support/test_support.hpp"
#include "vulnscore/error.hpp"
#include "vulnscore/evaluation.hpp"
#include "vulnscore/rng.hpp"
#include "vulnscore/synthetic.hpp"

using namespace vulnscore;

namespace {

Dataset separable(std::size_t n, std::uint64_t seed) {
    Dataset d;
    d.dictionary.append({"l1.a", Layer::L1, FeatureKind::Continuous, "", 0, 0});
    d.dictionary.append({"l2.b", Layer::L2, FeatureKind::Continuous, "", 0, 0});
    d.dictionary.append({"l3.c", Layer::L3, FeatureKind::Continuous, "", 0, 0});
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i % 3 != 0;
        const double s = pos ? 5.0 : -5.0;
        Instance inst;
        inst.id = "s" + std::to_string(i);
        inst.label = pos ? Label::Vulnerable : Label::BenignFlaw;
        inst.features = {{"l1.a", s + 0.3 * rng.normal()}, {"l2.b", s + 0.3 * rng.normal()}, {"l3.c", rng.normal()}};
        d.instances.push_back(inst);
    }
    return d;
}

const CellResult& cell(const ExperimentReport& r, ModelKind kind, SubsetKind subset) {
    for (const auto& c : r.cells)
        if (c.model == kind && c.subset == subset)
            return c;
    throw std::logic_error("cell not found");
}

bool same_pipeline(const FittedPipeline& a, const FittedPipeline& b) {
    return a.mask == b.mask && model_to_json(a.model).dump() == model_to_json(b.model).dump() &&
           a.model.w == b.model.w && a.model.b == b.model.b &&
           a.model.training.dual_coefficients == b.model.training.dual_coefficients;
}

} // namespace

TEST_CASE("split plan for the 50/25 corpus") {
    const auto d = generate_corpus(1);
    REQUIRE(d.count(Label::Vulnerable) == 50);
    const auto plan = make_split_plan(d, 42);
    CHECK(plan.train.size() == 56);
    CHECK(plan.test.size() == 19);
    std::set<Label> test_labels;
    for (auto i : plan.test)
        test_labels.insert(d.instances[i].label);
    CHECK(test_labels.size() == 2);
    CHECK(plan.folds == 10);
    CHECK(plan.bootstraps.size() == 100);
}

TEST_CASE("split plan invariants") {
    for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
        for (std::size_t n : {12u, 40u, 75u, 101u}) {
            SynthOptions opt;
            opt.instances = n;
            const auto d = generate_corpus(seed, opt);
            const auto plan = make_split_plan(d, seed, 10, 20);
            std::vector<std::size_t> all = plan.train;
            all.insert(all.end(), plan.test.begin(), plan.test.end());
            std::sort(all.begin(), all.end());
            std::vector<std::size_t> expect(n);
            std::iota(expect.begin(), expect.end(), 0);
            CHECK(all == expect);
            CHECK(std::is_sorted(plan.train.begin(), plan.train.end()));
            CHECK(plan.test.size() == (n + 2) / 4);

            const double pos_frac = static_cast<double>(d.count(Label::Vulnerable)) / static_cast<double>(n);
            std::vector<std::size_t> size(plan.folds), pos(plan.folds);
            for (std::size_t i = 0; i < n; ++i) {
                ++size[plan.fold_of[i]];
                pos[plan.fold_of[i]] += d.instances[i].label == Label::Vulnerable;
            }
            for (std::size_t f = 0; f < plan.folds; ++f)
                CHECK(std::abs(static_cast<double>(pos[f]) - pos_frac * static_cast<double>(size[f])) <= 1.0);
            const std::set<std::size_t> train_set(plan.train.begin(), plan.train.end());
            for (const auto& b : plan.bootstraps) {
                CHECK(b.size() == plan.train.size());
                for (auto i : b)
                    CHECK(train_set.count(i) == 1);
            }
        }
    }
}

TEST_CASE("split plan is deterministic and seed-dependent") {
    const auto d = generate_corpus(9);
    const auto a = make_split_plan(d, 7), b = make_split_plan(d, 7), c = make_split_plan(d, 8);
    CHECK(a.train == b.train);
    CHECK(a.fold_of == b.fold_of);
    CHECK(a.bootstraps == b.bootstraps);
    CHECK((a.train != c.train || a.fold_of != c.fold_of));
}

TEST_CASE("fold count falls back on tiny data") {
    CHECK(effective_folds(50, 25, 10) == 10);
    CHECK(effective_folds(2, 2, 10) == 2);
    CHECK(effective_folds(1, 5, 10) == 2);
    SynthOptions opt;
    opt.instances = 4;
    opt.vulnerable_fraction = 0.5;
    const auto plan = make_split_plan(generate_corpus(1, opt), 1);
    CHECK(plan.folds == 2);
    CHECK_FALSE(plan.warnings.empty());
}

TEST_CASE("split plan rejects single-class data") {
    auto d = generate_corpus(1);
    for (auto& inst : d.instances)
        inst.label = Label::Vulnerable;
    CHECK_THROWS_AS(make_split_plan(d, 1), ModelError);
}

TEST_CASE("stratified folds deal classes round-robin") {
    const std::vector<double> y{1, 1, 1, 1, -1, -1, -1};
    const auto f = stratified_folds(y, 3, 5);
    std::vector<std::size_t> size(3);
    for (auto k : f)
        ++size[k];
    // Seven items over three folds with the counter carrying over: sizes 3, 2, 2.
    CHECK(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()) <= 1);
}

TEST_CASE("RFE recovers planted features") {
    const auto d = generate_planted_linear(3);
    const auto planted = recorded_informative_features(d);
    REQUIRE(planted.size() == 5);
    const auto plan = make_split_plan(d, 3, 10, 0);
    for (auto kind : {ModelKind::Fda, ModelKind::Svm}) {
        const auto trace = run_rfe(d, kind, plan);
        REQUIRE(trace.ranking.size() == 20);
        std::size_t hits = 0;
        for (const auto& e : trace.ranking)
            if (e.rank <= 5)
                hits += std::count(planted.begin(), planted.end(), e.feature) > 0;
        CHECK(hits >= 4);

        // Oracle fit on every feature: the planted ones carry the largest weights.
        const auto model = train_model(kind, build_design_matrix(d, FeatureMask::all(d.dictionary)));
        std::vector<std::size_t> order(model.w.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return std::abs(model.w[a]) > std::abs(model.w[b]); });
        std::size_t top = 0;
        for (std::size_t k = 0; k < 5; ++k)
            top += std::count(planted.begin(), planted.end(), model.features[order[k]]) > 0;
        CHECK(top >= 4);
    }
}

TEST_CASE("RFE trace is nested and consistent") {
    const auto d = generate_planted_linear(4);
    const auto plan = make_split_plan(d, 4, 5, 0);
    for (std::size_t step : {1u, 3u, 50u}) {
        const auto trace = run_rfe(d, ModelKind::Svm, plan, step);
        const std::size_t p = d.dictionary.size();
        REQUIRE(trace.ranking.size() == p);
        std::set<std::size_t> ranks;
        for (std::size_t i = 0; i < p; ++i) {
            ranks.insert(trace.ranking[i].rank);
            CHECK(trace.ranking[i].rank == p - i);
        }
        CHECK(ranks.size() == p);
        const std::size_t selected = trace.selected.count();
        CHECK(selected == trace.selected_features.size());
        REQUIRE(trace.eliminated.size() == p - selected);
        for (std::size_t i = 0; i < trace.eliminated.size(); ++i)
            CHECK(trace.eliminated[i].feature == trace.ranking[i].feature);
        std::set<std::string> kept(trace.selected_features.begin(), trace.selected_features.end());
        for (std::size_t i = p - selected; i < p; ++i)
            CHECK(kept.count(trace.ranking[i].feature) == 1);
        // Curve sizes strictly decrease from p down to 1 and the chosen size is the best one.
        CHECK(trace.curve.front().size == p);
        CHECK(trace.curve.back().size == 1);
        double best = -1;
        for (const auto& pt : trace.curve)
            best = std::max(best, pt.accuracy.value_or(-1));
        const auto chosen = std::find_if(trace.curve.begin(), trace.curve.end(),
                                         [&](const RfePoint& pt) { return pt.size == selected; });
        REQUIRE(chosen != trace.curve.end());
        CHECK(chosen->accuracy.value_or(-1) == best);
        for (const auto& pt : trace.curve)
            if (pt.size < selected)
                CHECK(pt.accuracy.value_or(-1) < best);
    }
}

TEST_CASE("RFE on a single feature eliminates nothing") {
    Dataset d;
    d.dictionary.append({"l2.only", Layer::L2, FeatureKind::Continuous, "", 0, 0});
    Rng rng(2);
    for (int i = 0; i < 20; ++i)
        d.instances.push_back({"i" + std::to_string(i), i % 2 ? Label::Vulnerable : Label::BenignFlaw,
                               {{"l2.only", rng.normal() + (i % 2)}}, {}});
    const auto trace = run_rfe(d, ModelKind::Fda, make_split_plan(d, 2, 4, 0));
    CHECK(trace.eliminated.empty());
    CHECK(trace.selected_features == std::vector<std::string>{"l2.only"});
}

TEST_CASE("RFE tie between identical columns removes the later one first") {
    Dataset d;
    d.dictionary.append({"l2.a", Layer::L2, FeatureKind::Continuous, "", 0, 0});
    d.dictionary.append({"l2.b", Layer::L2, FeatureKind::Continuous, "", 0, 0});
    d.dictionary.append({"l2.c", Layer::L2, FeatureKind::Continuous, "", 0, 0});
    Rng rng(6);
    for (int i = 0; i < 30; ++i) {
        const double v = rng.normal() + (i % 2 ? 1.5 : 0.0);
        d.instances.push_back({"i" + std::to_string(i), i % 2 ? Label::Vulnerable : Label::BenignFlaw,
                               {{"l2.a", v}, {"l2.b", 0.01 * rng.normal()}, {"l2.c", v}}, {}});
    }
    for (auto kind : {ModelKind::Fda, ModelKind::Svm}) {
        const auto trace = run_rfe(d, kind, make_split_plan(d, 6, 3, 0));
        std::size_t pos_a = 0, pos_c = 0;
        for (std::size_t i = 0; i < trace.ranking.size(); ++i) {
            if (trace.ranking[i].feature == "l2.a")
                pos_a = i;
            if (trace.ranking[i].feature == "l2.c")
                pos_c = i;
        }
        CHECK(pos_c < pos_a);
    }
}

TEST_CASE("separable data is classified perfectly") {
    const auto d = separable(45, 1);
    EvalParams params;
    params.bootstraps = 10;
    const auto report = run_table1_grid(d, 1, params);
    REQUIRE(report.cells.size() == 6);
    for (const auto& c : report.cells) {
        CAPTURE(to_string(c.model));
        CAPTURE(to_string(c.subset));
        REQUIRE(c.mean_acc.has_value());
        CHECK(*c.mean_acc == 1.0);
        CHECK(c.fold_std == 0.0);
        CHECK(c.holdout_acc == 1.0);
    }
}

TEST_CASE("shuffled labels sit at chance") {
    SynthOptions opt;
    opt.shuffle_labels = true;
    opt.vulnerable_fraction = 0.5;
    opt.instances = 80;
    double total = 0;
    int cells = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto d = generate_corpus(seed, opt);
        EvalParams params;
        params.bootstraps = 40;
        const auto plan = make_split_plan(d, seed, 10, 40);
        const auto c = evaluate_cell(d, ModelKind::Fda, SubsetKind::All, plan, params);
        REQUIRE(c.ci.has_value());
        CHECK(c.ci->first <= 0.5);
        CHECK(c.ci->second >= 0.5);
        total += *c.mean_acc;
        ++cells;
    }
    CHECK(total / cells == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("planted corpus grid ordering") {
    EvalParams params;
    params.bootstraps = 0;
    const auto report = run_table1_grid(generate_corpus(5), 5, params);
    REQUIRE(report.cells.size() == 6);
    for (const auto& c : report.cells) {
        REQUIRE(c.mean_acc.has_value());
        CHECK(*c.mean_acc >= 0.0);
        CHECK(*c.mean_acc <= 1.0);
        for (double a : c.fold_accs) {
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
    }
    for (auto kind : {ModelKind::Fda, ModelKind::Svm})
        CHECK(*cell(report, kind, SubsetKind::L1L2).mean_acc < *cell(report, kind, SubsetKind::All).mean_acc);
    CHECK(report.cells[0].model == ModelKind::Fda);
    CHECK(report.cells[0].subset == SubsetKind::L1L2);
    CHECK(report.cells[5].model == ModelKind::Svm);
    CHECK(report.cells[5].subset == SubsetKind::Rfe);
}

TEST_CASE("two-instance dataset still produces a report") {
    SynthOptions opt;
    opt.instances = 2;
    opt.vulnerable_fraction = 0.5;
    const auto report = run_table1_grid(generate_corpus(3, opt), 3);
    CHECK(report.cells.size() == 6);
    CHECK(report.folds == 2);
    CHECK_FALSE(report.warnings.empty());
    const auto j = report_to_json(report);
    CHECK(j["cells"][0]["mean_acc"].is_null());
}

TEST_CASE("fold-internal pipelines equal refits on the training rows alone") {
    const auto d = generate_corpus(21);
    EvalParams params;
    params.bootstraps = 0;
    const auto plan = make_split_plan(d, 21, 10, 0);
    for (auto kind : {ModelKind::Fda, ModelKind::Svm}) {
        for (auto subset : {SubsetKind::L1L2, SubsetKind::All, SubsetKind::Rfe}) {
            const auto c = evaluate_cell(d, kind, subset, plan, params, true);
            REQUIRE(c.fold_models.size() == plan.folds);
            for (std::size_t f = 0; f < c.fold_models.size(); ++f) {
                const auto& fm = c.fold_models[f];
                for (auto i : fm.train_rows)
                    CHECK(plan.fold_of[i] != f);
                const auto refit = fit_pipeline(subset_dataset(d, fm.train_rows), kind, subset, params,
                                                fold_pipeline_seed(plan.seed, f));
                CHECK(same_pipeline(fm.pipeline, refit));
            }
        }
    }
}

TEST_CASE("weights do not touch the L1+L2 subset") {
    const auto d = generate_corpus(12);
    const auto plan = make_split_plan(d, 12, 5, 0);
    EvalParams a, b;
    a.bootstraps = b.bootstraps = 0;
    b.beta = 3.0;
    const auto ca = evaluate_cell(d, ModelKind::Svm, SubsetKind::L1L2, plan, a);
    const auto cb = evaluate_cell(d, ModelKind::Svm, SubsetKind::L1L2, plan, b);
    CHECK(ca.fold_accs == cb.fold_accs);
    const auto wa = evaluate_cell(d, ModelKind::Fda, SubsetKind::All, plan, a, true);
    const auto wb = evaluate_cell(d, ModelKind::Fda, SubsetKind::All, plan, b, true);
    CHECK(wa.fold_models[0].pipeline.model.w != wb.fold_models[0].pipeline.model.w);
}

TEST_CASE("report serialization is reproducible") {
    const auto d = generate_corpus(8);
    EvalParams params;
    params.bootstraps = 15;
    const auto a = report_to_json(run_table1_grid(d, 8, params)).dump(2);
    const auto b = report_to_json(run_table1_grid(d, 8, params)).dump(2);
    CHECK(a == b);
    const auto j = nlohmann::json::parse(a);
    CHECK(j["seed"] == 8);
    CHECK(j["split"]["train"] == 56);
    CHECK(j["split"]["test"] == 19);
    CHECK(j["cells"].size() == 6);
    CHECK(j["cells"][2].contains("selected_features"));
}

TEST_CASE("accuracy formatting and table rendering") {
    CHECK(format_accuracy(0.63) == ".63");
    CHECK(format_accuracy(0.05) == ".05");
    CHECK(format_accuracy(1.0) == "1.00");
    CHECK(format_accuracy(0.0) == ".00");
    CHECK(format_accuracy(std::nullopt) == "-");
    EvalParams params;
    params.bootstraps = 0;
    const auto table = render_table(run_table1_grid(generate_corpus(2), 2, params));
    CHECK(table.find("FDA") != std::string::npos);
    CHECK(table.find("SVM") != std::string::npos);
    CHECK(table.find("L1+L2") != std::string::npos);
    CHECK(table.find("RFE") != std::string::npos);
}

TEST_CASE("subset names round-trip") {
    for (auto s : {SubsetKind::L1L2, SubsetKind::All, SubsetKind::Rfe})
        CHECK(parse_subset_kind(to_string(s)) == s);
    CHECK_THROWS(parse_subset_kind("some"));
}
