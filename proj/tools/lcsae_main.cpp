#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "lcsae/chain_io.hpp"
#include "lcsae/config.hpp"
#include "lcsae/inference.hpp"
#include "lcsae/simulate.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lcsae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

void emit_table(const fs::path& path, const CsvTable& t, bool as_json) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    if (as_json) {
        json rows = json::array();
        for (const auto& r : t.rows) {
            json row;
            for (std::size_t j = 0; j < t.columns.size(); ++j) row[t.columns[j]] = r[j];
            rows.push_back(std::move(row));
        }
        f << json{{"columns", t.columns}, {"rows", rows}}.dump(2) << "\n";
        return;
    }
    for (std::size_t j = 0; j < t.columns.size(); ++j) f << (j ? "," : "") << t.columns[j];
    f << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t j = 0; j < r.size(); ++j) f << (j ? "," : "") << r[j];
        f << "\n";
    }
}

std::string fd(double x) { return format_double(x); }

SplineDesign build_design(const RunConfig& cfg, const ItemResponseMatrix& data) {
    std::vector<double> ages;
    for (const auto& u : data.units) ages.push_back(u.age);
    KnotSet knots = select_knots(ages, cfg.model.n_knots);
    Eigen::VectorXd age_vec(data.n_units());
    for (int i = 0; i < data.n_units(); ++i) age_vec[i] = data.units[i].age;
    DRBasis basis = demmler_reinsch(build_raw_design(age_vec, knots));
    return make_spline_design(basis, cfg.model.basis_kind);
}

int cmd_simulate(const RunConfig& cfg, const fs::path& out_dir, int classes, int units,
                 const std::string& smooth, const std::string& link) {
    TruthSpec truth;
    std::vector<int> cats;
    if (cfg.schema.items.empty())
        cats = {3, 3, 3, 3, 3};
    else
        for (const auto& it : cfg.schema.items) cats.push_back(it.categories);
    truth = default_truth(classes, cats, units, parse_smooth(smooth));
    truth.link = parse_link(link);
    if (truth.link == Link::multinomial_logit && classes > 1) {
        truth.cutpoints.clear();
        const int ne = classes - 1;
        truth.alpha0.assign(ne, 0.0);
        truth.alpha1.assign(ne, -1.0);
        truth.smooth.assign(ne, truth.smooth.empty() ? SmoothSpec{} : truth.smooth[0]);
        Eigen::VectorXd v0 = truth.v.empty() ? Eigen::VectorXd::Zero(truth.n_districts)
                                             : truth.v[0];
        truth.v.assign(ne, v0);
    }
    if (cfg.n_districts > 0) {
        truth.n_districts = cfg.n_districts;
        for (auto& vd : truth.v) {
            Eigen::VectorXd nv(cfg.n_districts);
            for (int d = 0; d < cfg.n_districts; ++d) nv[d] = vd[d % vd.size()];
            vd = nv;
        }
    }
    if (!cfg.age_classes.breaks.empty()) truth.age_classes = cfg.age_classes;

    SimulatedData sim = simulate_dataset(truth, cfg.sampler.seed);
    fs::create_directories(out_dir);
    save_responses(out_dir / "responses.csv", sim.responses);
    save_population_cells(out_dir / "cells.csv", sim.cells);

    json manifest;
    manifest["seed"] = cfg.sampler.seed;
    manifest["classes"] = classes;
    manifest["units"] = units;
    manifest["link"] = link_label(truth.link);
    manifest["smooth"] = smooth;
    manifest["n_districts"] = truth.n_districts;
    if (truth.link == Link::proportional_odds) manifest["cutpoints"] = truth.cutpoints;
    manifest["alpha1"] = truth.alpha1;
    json tc = json::array();
    for (Eigen::Index j = 0; j < sim.true_counts.rows(); ++j) {
        json row = json::array();
        for (Eigen::Index c = 0; c < sim.true_counts.cols(); ++c)
            row.push_back(sim.true_counts(j, c));
        tc.push_back(std::move(row));
    }
    manifest["true_area_class_counts"] = std::move(tc);
    std::ofstream mf(out_dir / "truth.json");
    mf << manifest.dump(2) << "\n";
    std::cout << "simulated " << units << " units into " << out_dir.string() << "\n";
    return kExitOk;
}

int cmd_fit(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.responses_path.empty()) throw ConfigError("fit requires paths.responses");
    if (cfg.output_dir.empty()) throw ConfigError("fit requires an output directory");
    ItemResponseMatrix data =
        load_responses(cfg.responses_path, cfg.schema, cfg.age_classes, cfg.n_districts);
    SplineDesign design = build_design(cfg, data);

    fs::create_directories(cfg.output_dir);
    save_run_config(cfg.output_dir / "config.json", cfg);
    save_spline_design(cfg.output_dir / "basis.json", design);

    ModelSpec spec = cfg.model;
    std::vector<ChainOutput> chains =
        run_chains(spec, data, design, cfg.prior, cfg.sampler, cfg.output_dir);
    for (std::size_t k = 0; k < chains.size(); ++k)
        save_chain_output(cfg.output_dir / ("chain" + std::to_string(k)), chains[k]);

    json manifest;
    manifest["config_hash"] = config_hash(cfg);
    manifest["chains"] = static_cast<int>(chains.size());
    manifest["kept_draws"] = chains.empty() ? 0 : chains[0].n_kept();
    std::ofstream mf(cfg.output_dir / "run.json");
    mf << manifest.dump(2) << "\n";
    std::cout << "fit complete: " << chains.size() << " chain(s), "
              << (chains.empty() ? 0 : chains[0].n_kept()) << " kept draws each\n";
    return kExitOk;
}

RunConfig load_run_dir_config(const fs::path& run_dir) {
    RunConfig cfg = load_run_config(run_dir / "config.json");
    std::ifstream mf(run_dir / "run.json");
    if (mf) {
        json manifest = json::parse(mf);
        std::string recorded = manifest.value("config_hash", "");
        if (!recorded.empty() && recorded != config_hash(cfg))
            throw ConfigError("config hash mismatch in " + run_dir.string() +
                              ": config.json was modified after the run");
    }
    return cfg;
}

int cmd_diagnose(const fs::path& run_dir, const fs::path& paired_dir, bool as_json,
                 long ppc_draws) {
    RunConfig cfg = load_run_dir_config(run_dir);
    ItemResponseMatrix data =
        load_responses(cfg.responses_path, cfg.schema, cfg.age_classes, cfg.n_districts);
    SplineDesign design = load_spline_design(run_dir / "basis.json");
    ChainOutput chain = load_chain_output(run_dir / "chain0");

    auto summaries = chain_summary(chain);
    CsvTable st;
    st.columns = {"parameter", "mean", "sd", "p025", "median", "p975", "ess", "degenerate"};
    for (const auto& s : summaries)
        st.rows.push_back({s.name, fd(s.mean), fd(s.sd), fd(s.q025), fd(s.q50), fd(s.q975),
                           fd(s.ess), s.degenerate ? "1" : "0"});
    emit_table(run_dir / (as_json ? "summary.json" : "summary.csv"), st, as_json);

    auto cdfs = deviance_cdf({&chain}, {"chain0"});
    CsvTable dt;
    dt.columns = {"model", "deviance", "ecdf"};
    for (const auto& c : cdfs)
        for (std::size_t g = 0; g < c.grid.size(); ++g)
            dt.rows.push_back({c.label, fd(c.grid[g]), fd(c.ecdf[g])});
    emit_table(run_dir / (as_json ? "deviance_cdf.json" : "deviance_cdf.csv"), dt, as_json);

    PPCReport ppc = ppc_pvalues(chain, data, design, derive_seed(chain.seed, 9001), ppc_draws);
    CsvTable pt;
    pt.columns = {"p025", "p25", "mean", "median", "p75", "p975", "included", "excluded"};
    pt.rows.push_back({fd(ppc.q025), fd(ppc.q25), fd(ppc.mean), fd(ppc.median), fd(ppc.q75),
                       fd(ppc.q975), std::to_string(ppc.p_values.size()),
                       std::to_string(ppc.excluded_units)});
    emit_table(run_dir / (as_json ? "ppc.json" : "ppc.csv"), pt, as_json);

    if (!paired_dir.empty()) {
        ChainOutput other = load_chain_output(paired_dir / "chain0");
        MixingComparison cmp = compare_mixing(chain, other);
        CsvTable mt;
        mt.columns = {"parameter", "ess_this", "ess_other", "ratio"};
        for (std::size_t k = 0; k < cmp.names.size(); ++k)
            mt.rows.push_back({cmp.names[k], fd(cmp.ess_first[k]), fd(cmp.ess_second[k]),
                               fd(cmp.ratio[k])});
        emit_table(run_dir / (as_json ? "mixing.json" : "mixing.csv"), mt, as_json);
    }
    std::cout << "diagnostics written to " << run_dir.string() << "\n";
    return kExitOk;
}

int cmd_estimate(const fs::path& run_dir, const fs::path& cells_path, bool as_json) {
    RunConfig cfg = load_run_dir_config(run_dir);
    fs::path cp = cells_path.empty() ? cfg.cells_path : cells_path;
    if (cp.empty()) throw ConfigError("estimate requires a population cells file");
    PopulationCellTable cells = load_population_cells(cp, cfg.age_classes, cfg.n_districts);
    SplineDesign design = load_spline_design(run_dir / "basis.json");
    ChainOutput chain = load_chain_output(run_dir / "chain0");

    CountEstimateTable table = estimate_counts(chain, cells, design, /*keep_draws=*/true);
    const int A = cells.age_classes.n_classes();
    CsvTable et;
    et.columns = {"district", "age_class", "class", "estimate", "cv_percent", "p025", "median",
                  "p975"};
    for (const auto& e : table.estimates) {
        int district = (e.small_area - 1) / A + 1;
        int age_class = (e.small_area - 1) % A + 1;
        et.rows.push_back({std::to_string(district), std::to_string(age_class),
                           std::to_string(e.latent_class), fd(e.mean),
                           e.cv_percent ? fd(*e.cv_percent) : "null", fd(e.q025), fd(e.q50),
                           fd(e.q975)});
    }
    emit_table(run_dir / (as_json ? "counts.json" : "counts.csv"), et, as_json);

    // district aggregates, summarized per draw so intervals are coherent
    CsvTable at;
    at.columns = {"district", "class", "estimate", "cv_percent", "p025", "median", "p975"};
    const long M = chain.n_kept();
    for (int d = 1; d <= cells.n_districts; ++d)
        for (int c = 1; c <= table.n_classes; ++c) {
            std::vector<double> draws(M, 0.0);
            for (int a = 1; a <= A; ++a) {
                const auto& e = table.at((d - 1) * A + a, c);
                for (long m = 0; m < M; ++m) draws[m] += e.draws[m];
            }
            double mean = 0;
            for (double x : draws) mean += x;
            mean /= M;
            double ss = 0;
            for (double x : draws) ss += (x - mean) * (x - mean);
            double sd = M > 1 ? std::sqrt(ss / (M - 1)) : 0.0;
            at.rows.push_back({std::to_string(d), std::to_string(c), fd(mean),
                               mean > 0 ? fd(100.0 * sd / mean) : "null",
                               fd(empirical_quantile(draws, 0.025)),
                               fd(empirical_quantile(draws, 0.5)),
                               fd(empirical_quantile(draws, 0.975))});
        }
    emit_table(run_dir / (as_json ? "counts_district.json" : "counts_district.csv"), at, as_json);
    std::cout << "count estimates written to " << run_dir.string() << "\n";
    return kExitOk;
}

int cmd_basis(const RunConfig& cfg, const fs::path& out_path) {
    if (cfg.responses_path.empty()) throw ConfigError("basis requires paths.responses");
    ItemResponseMatrix data =
        load_responses(cfg.responses_path, cfg.schema, cfg.age_classes, cfg.n_districts);
    std::vector<double> ages;
    for (const auto& u : data.units) ages.push_back(u.age);
    KnotSet knots = select_knots(ages, cfg.model.n_knots);
    Eigen::VectorXd age_vec(data.n_units());
    for (int i = 0; i < data.n_units(); ++i) age_vec[i] = data.units[i].age;
    DRBasis basis = demmler_reinsch(build_raw_design(age_vec, knots));
    SplineDesign design = make_spline_design(basis, cfg.model.basis_kind);

    double orth = (basis.Atilde.transpose() * basis.Atilde -
                   Eigen::MatrixXd::Identity(basis.Atilde.cols(), basis.Atilde.cols()))
                      .cwiseAbs()
                      .maxCoeff();
    CovarianceIdentityCheck cov_check = check_covariance_identity(basis);

    json dump;
    dump["kind"] = cfg.model.basis_kind == SplineBasisKind::demmler_reinsch ? "demmler-reinsch"
                                                                            : "thin-plate";
    dump["n_columns"] = static_cast<int>(basis.Atilde.cols());
    dump["n_penalized"] = basis.n_knots();
    json kn = json::array();
    for (int k = 0; k < basis.knots.size(); ++k) kn.push_back(basis.knots.knots[k]);
    dump["knots"] = std::move(kn);
    json sv = json::array();
    for (int k = 0; k < basis.n_knots(); ++k) sv.push_back(basis.s[k]);
    dump["penalty_eigenvalues"] = std::move(sv);
    dump["orthonormality_error"] = orth;
    dump["orthonormal"] = orth <= 1e-10;
    dump["covariance_identity_checked"] = cov_check.omega_pd;
    dump["covariance_identity_error"] = cov_check.max_abs_error;

    fs::path p = out_path.empty() ? fs::path("basis_dump.json") : out_path;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p);
    f << dump.dump(2) << "\n";
    save_spline_design(p.parent_path() / ("design_" + p.filename().string()), design);
    std::cout << "basis dump written to " << p.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical latent class small-area estimation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, link = "proportional-odds", smooth = "logistic";
    std::string run_dir, paired_dir, cells_path, basis_kind, out_path;
    std::uint64_t seed = 0;
    bool seed_set = false, as_json = false;
    int chains = 0, classes = 3, units = 2000;
    long ppc_draws = 400;

    app.add_option("--config", config_path, "run configuration file (JSON)");
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "master seed override");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--chains", chains, "chain count override");
    app.add_flag("--json", as_json, "emit reports as structured text instead of CSV");

    auto* sim = app.add_subcommand("simulate", "generate synthetic data with known truth");
    sim->add_option("--classes", classes, "latent classes in the truth");
    sim->add_option("--units", units, "sample size");
    sim->add_option("--smooth", smooth, "true age effect: zero|linear|logistic|quadratic");
    sim->add_option("--link", link, "membership link in the truth");

    auto* fit = app.add_subcommand("fit", "fit the model and write chains");
    fit->add_option("--basis", basis_kind, "spline basis: demmler-reinsch|thin-plate");

    auto* diag = app.add_subcommand("diagnose", "deviance CDF, PPC, summaries, mixing");
    diag->add_option("--run", run_dir, "run directory")->required();
    diag->add_option("--paired", paired_dir, "paired run for the mixing comparison");
    diag->add_option("--ppc-draws", ppc_draws, "draws used by the PPC (0 = all)");

    auto* est = app.add_subcommand("estimate", "small-area count estimates");
    est->add_option("--run", run_dir, "run directory")->required();
    est->add_option("--cells", cells_path, "population cells file");

    auto* bas = app.add_subcommand("basis", "dump the spline basis");
    bas->add_option("--dump", out_path, "dump file path");
    bas->add_option("--basis", basis_kind, "spline basis: demmler-reinsch|thin-plate");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (seed_set) cfg.sampler.seed = seed;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (chains > 0) cfg.sampler.chains = chains;
        if (!basis_kind.empty()) {
            if (basis_kind == "demmler-reinsch")
                cfg.model.basis_kind = SplineBasisKind::demmler_reinsch;
            else if (basis_kind == "thin-plate")
                cfg.model.basis_kind = SplineBasisKind::thin_plate;
            else
                throw ConfigError("unknown basis '" + basis_kind + "'");
        }

        if (sim->parsed())
            return cmd_simulate(cfg, cfg.output_dir.empty() ? "sim_out" : cfg.output_dir, classes,
                                units, smooth, link);
        if (fit->parsed()) return cmd_fit(cfg);
        if (diag->parsed()) return cmd_diagnose(run_dir, paired_dir, as_json, ppc_draws);
        if (est->parsed()) return cmd_estimate(run_dir, cells_path, as_json);
        if (bas->parsed()) return cmd_basis(cfg, out_path);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
