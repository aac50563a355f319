#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "lcsae/chain_io.hpp"
#include "lcsae/sampler.hpp"
#include "lcsae/simulate.hpp"

using namespace lcsae;
namespace fs = std::filesystem;

namespace {

// tiny fitted-model fixture: simulated data plus a matching spline design
struct Fixture {
    ItemResponseMatrix data;
    SplineDesign design;
    ModelSpec spec;
    PriorSpec prior;
};

Fixture make_fixture(int n_classes, int n_units, std::uint64_t seed, int n_knots = 4) {
    Fixture fx;
    TruthSpec truth = default_truth(n_classes, {3, 3, 3}, n_units);
    auto sim = simulate_dataset(truth, seed);
    fx.data = std::move(sim.responses);
    std::vector<double> ages;
    for (const auto& u : fx.data.units) ages.push_back(u.age);
    KnotSet knots = select_knots(ages, n_knots);
    Eigen::VectorXd av(fx.data.n_units());
    for (int i = 0; i < fx.data.n_units(); ++i) av[i] = fx.data.units[i].age;
    fx.design = make_spline_design(demmler_reinsch(build_raw_design(av, knots)),
                                   SplineBasisKind::demmler_reinsch);
    fx.spec.n_classes = n_classes;
    fx.spec.n_knots = n_knots;
    return fx;
}

SplineDesign empty_design(int n_rows) {
    SplineDesign d;
    d.X = Eigen::MatrixXd::Zero(n_rows, 0);
    d.prior_weight = Eigen::VectorXd(0);
    d.knots_std = Eigen::VectorXd(0);
    d.map = Eigen::MatrixXd(0, 0);
    return d;
}

ItemResponseMatrix empty_data() {
    ItemResponseMatrix data;
    data.schema.items = {{"a", 2}};
    data.n_districts = 1;
    data.age_classes = AgeClassMap{51, {}};
    return data;
}

}  // namespace

TEST_CASE("config validation and kept-draw arithmetic") {
    SamplerConfig cfg;
    CHECK(cfg.kept_draws() == 35000);  // (120000 - 15000) / 3
    cfg.iterations = 103;
    cfg.burn_in = 100;
    cfg.thin = 3;
    CHECK(cfg.kept_draws() == 1);
    CHECK_NOTHROW(cfg.validate());
    cfg.burn_in = 103;
    CHECK_THROWS_AS(cfg.validate(), SamplerError);
    cfg.burn_in = 10;
    cfg.thin = 0;
    CHECK_THROWS_AS(cfg.validate(), SamplerError);
}

TEST_CASE("init_state is deterministic and seed-sensitive") {
    Fixture fx = make_fixture(3, 150, 1);
    GibbsSampler s1(fx.spec, fx.data, fx.design, fx.prior, 42);
    GibbsSampler s2(fx.spec, fx.data, fx.design, fx.prior, 42);
    ChainState a = s1.init_state();
    ChainState b = s2.init_state();
    CHECK(a.memberships == b.memberships);
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 3; ++t)
            CHECK((a.theta.theta[c][t] - b.theta.theta[c][t]).norm() == 0.0);

    GibbsSampler s3(fx.spec, fx.data, fx.design, fx.prior, 43);
    ChainState c3 = s3.init_state();
    CHECK((a.theta.theta[0][0] - c3.theta.theta[0][0]).norm() > 0.0);

    // regression parameters start at zero, variances at B/2, cutpoints increasing
    CHECK(a.params.eq[0].alpha1 == 0.0);
    CHECK(a.params.eq[0].w.norm() == 0.0);
    CHECK(a.variances.sigma_b[0] == doctest::Approx(8.0));
    for (std::size_t c = 1; c < a.params.cutpoints.size(); ++c)
        CHECK(a.params.cutpoints[c] > a.params.cutpoints[c - 1]);
}

TEST_CASE("single-class model degenerates cleanly") {
    Fixture fx = make_fixture(1, 60, 2);
    GibbsSampler s(fx.spec, fx.data, fx.design, fx.prior, 7);
    ChainState st = s.init_state();
    for (int q : st.memberships) CHECK(q == 1);
    SamplerConfig cfg;
    cfg.iterations = 60;
    cfg.burn_in = 20;
    cfg.thin = 2;
    ChainOutput out = s.run(cfg);
    CHECK(out.n_kept() == 20);
    CHECK(out.param_names.empty());
    CHECK(out.theta_names.size() == 9);
}

TEST_CASE("membership Gibbs step") {
    SUBCASE("deterministic theta forces memberships") {
        ItemResponseMatrix data;
        data.schema.items = {{"a", 3}, {"b", 3}};
        data.n_districts = 1;
        data.age_classes = AgeClassMap{51, {}};
        for (int i = 0; i < 10; ++i) {
            UnitRecord u;
            u.age = 60;
            u.district = 1;
            u.small_area = 1;
            u.responses = (i % 2 == 0) ? std::vector<int>{1, 1} : std::vector<int>{2, 3};
            data.units.push_back(u);
        }
        ModelSpec spec;
        spec.n_classes = 2;
        PriorSpec prior;
        GibbsSampler s(spec, data, empty_design(10), prior, 11);
        ChainState st = s.init_state();
        // class 1 emits only category 1; class 2 only categories 2/3
        for (int t = 0; t < 2; ++t) {
            st.theta.theta[0][t] << 1.0, 0.0, 0.0;
            st.theta.theta[1][t] << 0.0, 0.5, 0.5;
        }
        s.update_memberships(st);
        for (int i = 0; i < 10; ++i) CHECK(st.memberships[i] == (i % 2 == 0 ? 1 : 2));
    }
    SUBCASE("hand-set two-class conditional: empirical rate 0.7 over many draws") {
        ItemResponseMatrix data = empty_data();
        UnitRecord u;
        u.age = 60;
        u.district = 1;
        u.small_area = 1;
        u.responses = {1};
        data.units.push_back(u);
        ModelSpec spec;
        spec.n_classes = 2;
        PriorSpec prior;
        GibbsSampler s(spec, data, empty_design(1), prior, 5);
        ChainState st = s.init_state();
        // choose theta and cutpoint so P(Q=2 | y) = 0.7:
        // prior odds even (cutpoint 0), likelihood ratio 7:3
        st.params.cutpoints = {0.0};
        st.theta.theta[0][0] << 0.3, 0.7;
        st.theta.theta[1][0] << 0.7, 0.3;
        long hits = 0;
        const long N = 100000;
        for (long k = 0; k < N; ++k) {
            s.update_memberships(st);
            if (st.memberships[0] == 2) ++hits;
        }
        double rate = static_cast<double>(hits) / N;
        CHECK(rate == doctest::Approx(0.7).epsilon(0.015));
    }
}

TEST_CASE("conjugate item-probability update") {
    SUBCASE("posterior mean matches the closed form") {
        // 1000 units in class 1, every response category 2 of 3
        ItemResponseMatrix data;
        data.schema.items = {{"a", 3}};
        data.n_districts = 1;
        data.age_classes = AgeClassMap{51, {}};
        for (int i = 0; i < 1000; ++i) {
            UnitRecord u;
            u.age = 60;
            u.district = 1;
            u.small_area = 1;
            u.responses = {2};
            data.units.push_back(u);
        }
        ModelSpec spec;
        spec.n_classes = 1;
        PriorSpec prior;
        GibbsSampler s(spec, data, empty_design(1000), prior, 9);
        ChainState st = s.init_state();
        double sum = 0.0;
        const int N = 20000;
        for (int k = 0; k < N; ++k) {
            s.update_item_probs(st);
            sum += st.theta.theta[0][0][1];
        }
        double expected = 1001.0 / 1003.0;  // (1 + count) / (H + class size)
        double se = std::sqrt(expected * (1 - expected) / 1003.0) / std::sqrt(double(N));
        CHECK(std::abs(sum / N - expected) < 5 * se + 1e-5);
    }
    SUBCASE("empty class regenerates from the prior with uniform mean") {
        ItemResponseMatrix data = empty_data();
        UnitRecord u;
        u.age = 60;
        u.district = 1;
        u.small_area = 1;
        u.responses = {1};
        data.units.push_back(u);
        ModelSpec spec;
        spec.n_classes = 2;
        PriorSpec prior;
        GibbsSampler s(spec, data, empty_design(1), prior, 13);
        ChainState st = s.init_state();
        st.memberships[0] = 1;  // class 2 stays empty
        double sum = 0.0;
        const int N = 20000;
        for (int k = 0; k < N; ++k) {
            s.update_item_probs(st);
            sum += st.theta.theta[1][0][0];
        }
        CHECK(sum / N == doctest::Approx(0.5).epsilon(0.02));
    }
}

TEST_CASE("prior recovery with no data") {
    ItemResponseMatrix data = empty_data();  // zero units
    ModelSpec spec;
    spec.n_classes = 2;
    spec.n_knots = 0;
    PriorSpec prior;
    GibbsSampler s(spec, data, empty_design(0), prior, 21);
    ChainState st = s.init_state();
    std::vector<double> alpha1, sigma_b;
    const int sweeps = 30000;
    for (int k = 0; k < sweeps; ++k) {
        s.sweep(st, k < 2000);
        if (k >= 2000 && k % 5 == 0) {
            alpha1.push_back(st.params.eq[0].alpha1);
            sigma_b.push_back(st.variances.sigma_b[0]);
        }
    }
    double m = std::accumulate(alpha1.begin(), alpha1.end(), 0.0) / alpha1.size();
    double ss = 0;
    for (double x : alpha1) ss += (x - m) * (x - m);
    double sd = std::sqrt(ss / (alpha1.size() - 1));
    // alpha1 ~ N(0, 100): generous Monte Carlo bands for a correlated chain
    CHECK(std::abs(m) < 2.5);
    CHECK(sd == doctest::Approx(10.0).epsilon(0.2));
    // sigma_b ~ Uniform(0, 16)
    double mb = std::accumulate(sigma_b.begin(), sigma_b.end(), 0.0) / sigma_b.size();
    CHECK(mb == doctest::Approx(8.0).epsilon(0.1));
    for (double x : sigma_b) CHECK((x > 0 && x < 16));
}

TEST_CASE("run shape, determinism, and adaptation freeze") {
    Fixture fx = make_fixture(2, 120, 4);
    SamplerConfig cfg;
    cfg.iterations = 400;
    cfg.burn_in = 100;
    cfg.thin = 3;
    cfg.seed = 77;

    GibbsSampler s1(fx.spec, fx.data, fx.design, fx.prior, 77);
    ChainOutput a = s1.run(cfg);
    CHECK(a.n_kept() == 100);

    GibbsSampler s2(fx.spec, fx.data, fx.design, fx.prior, 77);
    ChainOutput b = s2.run(cfg);
    CHECK((a.draws - b.draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.theta_draws - b.theta_draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.deviance - b.deviance).cwiseAbs().maxCoeff() == 0.0);

    GibbsSampler s3(fx.spec, fx.data, fx.design, fx.prior, 78);
    ChainOutput c = s3.run(cfg);
    CHECK((a.draws - c.draws).cwiseAbs().maxCoeff() > 0.0);

    // proposal scales stop changing once adaptation is off
    GibbsSampler s4(fx.spec, fx.data, fx.design, fx.prior, 79);
    ChainState st = s4.init_state();
    for (int k = 0; k < 200; ++k) s4.sweep(st, true);
    std::vector<double> frozen = st.proposal_scales;
    for (int k = 0; k < 50; ++k) s4.sweep(st, false);
    CHECK(st.proposal_scales == frozen);
}

TEST_CASE("every kept state satisfies the contained-type invariants") {
    Fixture fx = make_fixture(3, 150, 6);
    SamplerConfig cfg;
    cfg.iterations = 300;
    cfg.burn_in = 100;
    cfg.thin = 4;
    GibbsSampler s(fx.spec, fx.data, fx.design, fx.prior, 5);
    ChainOutput out = s.run(cfg);
    for (long m = 0; m < out.n_kept(); ++m) {
        MembershipParams p = out.params_at(m);
        CHECK_NOTHROW(p.validate());
        ItemProbTable theta = out.theta_at(m);
        CHECK_NOTHROW(theta.validate(1e-9));
        // variance components land inside (0, B)
        for (std::size_t j = 0; j < out.param_names.size(); ++j)
            if (out.param_names[j].rfind("sigma", 0) == 0) {
                CHECK(out.draws(m, j) > 0.0);
                CHECK(out.draws(m, j) < 16.0);
            }
    }
}

TEST_CASE("multinomial-logit relabeling keeps classes severity-ordered") {
    Fixture fx = make_fixture(3, 150, 8);
    fx.spec.link = Link::multinomial_logit;
    SamplerConfig cfg;
    cfg.iterations = 200;
    cfg.burn_in = 50;
    cfg.thin = 2;
    GibbsSampler s(fx.spec, fx.data, fx.design, fx.prior, 31);
    ChainOutput out = s.run(cfg);
    for (long m = 0; m < out.n_kept(); ++m) {
        ItemProbTable theta = out.theta_at(m);
        std::vector<double> sev(3, 0.0);
        for (int c = 0; c < 3; ++c) {
            for (int t = 0; t < 3; ++t)
                for (int h = 0; h < 3; ++h) sev[c] += (h + 1) * theta.theta[c][t][h];
            sev[c] /= 3;
        }
        CHECK(std::is_sorted(sev.begin(), sev.end()));
    }
}

TEST_CASE("slice sampler and sd full conditional") {
    SUBCASE("uniform-prior conditional matches the analytic density (KS)") {
        const int m = 12;
        const double ss = 8.0;
        const double B = 16.0;
        SdPrior prior;
        Rng rng(123);
        const int N = 100000;
        std::vector<double> draws(N);
        double cur = 1.0;
        for (int k = 0; k < N; ++k) {
            cur = draw_sd(prior, m, ss, cur, rng);
            draws[k] = cur;
        }
        std::sort(draws.begin(), draws.end());
        // numerically normalized CDF of sigma^-m exp(-ss / (2 sigma^2)) on (0, B)
        const int G = 4000;
        std::vector<double> grid(G), cdf(G);
        double total = 0;
        for (int g = 0; g < G; ++g) {
            grid[g] = B * (g + 0.5) / G;
            double lf = -m * std::log(grid[g]) - 0.5 * ss / (grid[g] * grid[g]);
            total += std::exp(lf);
            cdf[g] = total;
        }
        for (double& c : cdf) c /= total;
        double ks = 0;
        for (int g = 0; g < G; ++g) {
            auto it = std::upper_bound(draws.begin(), draws.end(), grid[g]);
            double emp = static_cast<double>(it - draws.begin()) / N;
            ks = std::max(ks, std::abs(emp - cdf[g]));
        }
        CHECK(ks < 0.015);
    }
    SUBCASE("no effects draws from the prior") {
        SdPrior prior;
        prior.B = 4.0;
        Rng rng(7);
        double sum = 0;
        const int N = 50000;
        for (int k = 0; k < N; ++k) {
            double x = draw_sd(prior, 0, 0.0, 1.0, rng);
            CHECK(x > 0);
            CHECK(x < 4.0);
            sum += x;
        }
        CHECK(sum / N == doctest::Approx(2.0).epsilon(0.02));
    }
    SUBCASE("small bound truncates visibly") {
        SdPrior prior;
        prior.B = 1.0;
        Rng rng(9);
        double mean = 0;
        const int N = 5000;
        double cur = 0.5;
        for (int k = 0; k < N; ++k) {
            cur = draw_sd(prior, 5, 500.0, cur, rng);  // conditional mass far above B
            mean += cur;
        }
        CHECK(mean / N > 0.9);
    }
    SUBCASE("inverse-gamma prior is conjugate") {
        SdPrior prior;
        prior.type = SdPriorType::inv_gamma;
        prior.a = 2.0;
        prior.b = 3.0;
        Rng rng(11);
        const int m = 10;
        const double ss = 20.0;
        double sum_prec = 0;
        const int N = 100000;
        for (int k = 0; k < N; ++k) {
            double sigma = draw_sd(prior, m, ss, 1.0, rng);
            sum_prec += 1.0 / (sigma * sigma);
        }
        // 1/sigma^2 ~ Gamma(a + m/2, rate b + ss/2), mean 7/13
        CHECK(sum_prec / N == doctest::Approx(7.0 / 13.0).epsilon(0.02));
    }
}

TEST_CASE("multiple chains use independent derived streams") {
    Fixture fx = make_fixture(2, 80, 10);
    SamplerConfig cfg;
    cfg.iterations = 120;
    cfg.burn_in = 40;
    cfg.thin = 2;
    cfg.chains = 2;
    cfg.seed = 1000;
    auto chains = run_chains(fx.spec, fx.data, fx.design, fx.prior, cfg);
    REQUIRE(chains.size() == 2);
    CHECK(chains[0].seed != chains[1].seed);
    CHECK((chains[0].draws - chains[1].draws).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("chain serialization round-trips exactly") {
    Fixture fx = make_fixture(2, 80, 12);
    SamplerConfig cfg;
    cfg.iterations = 100;
    cfg.burn_in = 40;
    cfg.thin = 2;
    GibbsSampler s(fx.spec, fx.data, fx.design, fx.prior, 55);
    ChainOutput out = s.run(cfg);

    fs::path dir = fs::temp_directory_path() / "lcsae_test_chain";
    fs::remove_all(dir);
    save_chain_output(dir, out);
    ChainOutput back = load_chain_output(dir);
    CHECK(back.param_names == out.param_names);
    CHECK(back.theta_names == out.theta_names);
    CHECK((back.draws - out.draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.theta_draws - out.theta_draws).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.deviance - out.deviance).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.seed == out.seed);
    CHECK(back.layout.n_classes == out.layout.n_classes);
    CHECK(back.acceptance.proposals == out.acceptance.proposals);
}

TEST_CASE("checkpoint round-trip is self-describing") {
    Fixture fx = make_fixture(3, 100, 14);
    GibbsSampler s(fx.spec, fx.data, fx.design, fx.prior, 66);
    ChainState st = s.init_state();
    for (int k = 0; k < 10; ++k) s.sweep(st, true);
    fs::path p = fs::temp_directory_path() / "lcsae_test_chain" / "ckpt.json";
    write_checkpoint(p, st, s.layout(), 10);
    Checkpoint ck = load_checkpoint(p);
    CHECK(ck.iteration == 10);
    CHECK(ck.state.memberships == st.memberships);
    CHECK(ck.state.params.cutpoints == st.params.cutpoints);
    CHECK(ck.state.variances.sigma_b == st.variances.sigma_b);
    CHECK((ck.state.params.eq[0].w - st.params.eq[0].w).norm() == 0.0);
    CHECK(ck.layout.item_categories == s.layout().item_categories);
}

TEST_CASE("spline design serialization round-trips") {
    Fixture fx = make_fixture(2, 90, 16);
    fs::path p = fs::temp_directory_path() / "lcsae_test_chain" / "design.json";
    save_spline_design(p, fx.design);
    SplineDesign back = load_spline_design(p);
    CHECK(back.kind == fx.design.kind);
    CHECK((back.X - fx.design.X).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.map - fx.design.map).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.center == fx.design.center);
    Eigen::VectorXd probe(3);
    probe << 55, 70, 95;
    CHECK((back.rows(probe) - fx.design.rows(probe)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-component posterior matches the conjugate Beta law") {
    // with C=1 and one binary item the chain's theta marginal is exactly
    // Beta(1 + n1, 1 + n2); the sampler must reproduce its moments
    ItemResponseMatrix data = empty_data();
    int n1 = 0;
    for (int i = 0; i < 30; ++i) {
        UnitRecord u;
        u.age = 60;
        u.district = 1;
        u.small_area = 1;
        u.responses = {(i % 3 == 0) ? 1 : 2};
        if (i % 3 == 0) ++n1;
        data.units.push_back(u);
    }
    ModelSpec spec;
    spec.n_classes = 1;
    PriorSpec prior;
    SamplerConfig cfg;
    cfg.iterations = 30000;
    cfg.burn_in = 1000;
    cfg.thin = 1;
    GibbsSampler s(spec, data, empty_design(30), prior, 99);
    ChainOutput out = s.run(cfg);
    double mean = out.theta_draws.col(0).mean();
    double expected = (1.0 + n1) / (2.0 + 30.0);
    double var_expected = expected * (1 - expected) / (2.0 + 30.0 + 1.0);
    Eigen::VectorXd col = out.theta_draws.col(0);
    double var = (col.array() - mean).square().sum() / (col.size() - 1);
    CHECK(mean == doctest::Approx(expected).epsilon(0.01));
    CHECK(var == doctest::Approx(var_expected).epsilon(0.05));
}
