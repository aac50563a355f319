#include "lcsae/chain_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>

namespace lcsae {

using json = nlohmann::ordered_json;

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    // trim to the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, x);
        if (std::strtod(shorter, nullptr) == x) return shorter;
    }
    return buf;
}

namespace {

std::string link_key(Link link) { return link_label(link); }

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& m) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    for (std::size_t j = 0; j < header.size(); ++j) f << (j ? "," : "") << header[j];
    f << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) f << (j ? "," : "") << format_double(m(r, j));
        f << "\n";
    }
    if (!f) throw IoError("write failed on " + path.string());
}

Eigen::MatrixXd read_csv(const std::filesystem::path& path, std::vector<std::string>* header) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty file " + path.string());
    std::vector<std::string> names;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        names.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            row.push_back(std::strtod(line.c_str() + pos, nullptr));
            pos = comma + 1;
        }
        if (row.size() != names.size())
            throw IoError("ragged row in " + path.string());
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < names.size(); ++j)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
    if (header) *header = std::move(names);
    return m;
}

json layout_to_json(const ChainLayout& lay) {
    return json{{"link", link_key(lay.link)},
                {"n_classes", lay.n_classes},
                {"n_knots", lay.n_knots},
                {"n_districts", lay.n_districts},
                {"use_marital", lay.use_marital},
                {"item_categories", lay.item_categories}};
}

ChainLayout layout_from_json(const json& j) {
    ChainLayout lay;
    lay.link = parse_link(j.at("link").get<std::string>());
    lay.n_classes = j.at("n_classes").get<int>();
    lay.n_knots = j.at("n_knots").get<int>();
    lay.n_districts = j.at("n_districts").get<int>();
    lay.use_marital = j.at("use_marital").get<bool>();
    lay.item_categories = j.at("item_categories").get<std::vector<int>>();
    return lay;
}

json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = nr > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    Eigen::MatrixXd m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r)
        for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
    return m;
}

}  // namespace

void save_chain_output(const std::filesystem::path& dir, const ChainOutput& out) {
    std::filesystem::create_directories(dir);
    json manifest;
    manifest["format_version"] = 1;
    manifest["seed"] = out.seed;
    manifest["config"] = {{"iterations", out.config.iterations},
                          {"burn_in", out.config.burn_in},
                          {"thin", out.config.thin},
                          {"chains", out.config.chains},
                          {"seed", out.config.seed},
                          {"adapt_window", out.config.adapt_window},
                          {"target_accept", out.config.target_accept}};
    manifest["layout"] = layout_to_json(out.layout);
    manifest["blocks"] = {
        {"params", {{"file", "params.csv"}, {"columns", out.param_names}}},
        {"theta", {{"file", "theta.csv"}, {"columns", out.theta_names}}},
        {"deviance", {{"file", "deviance.csv"}, {"columns", {"deviance", "log_posterior"}}}}};
    manifest["acceptance"] = {{"block_names", out.acceptance.block_names},
                              {"proposals", out.acceptance.proposals},
                              {"accepts", out.acceptance.accepts},
                              {"final_scales", out.acceptance.final_scales}};
    {
        std::ofstream f(dir / "manifest.json");
        if (!f) throw IoError("cannot write " + (dir / "manifest.json").string());
        f << manifest.dump(2) << "\n";
    }
    write_csv(dir / "params.csv", out.param_names, out.draws);
    write_csv(dir / "theta.csv", out.theta_names, out.theta_draws);
    Eigen::MatrixXd dv(out.deviance.size(), 2);
    dv.col(0) = out.deviance;
    dv.col(1) = out.log_post;
    write_csv(dir / "deviance.csv", {"deviance", "log_posterior"}, dv);
}

ChainOutput load_chain_output(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw IoError("cannot read " + (dir / "manifest.json").string());
    json manifest = json::parse(f);
    if (manifest.at("format_version").get<int>() != 1)
        throw IoError("unsupported chain format version");
    ChainOutput out;
    out.seed = manifest.at("seed").get<std::uint64_t>();
    const json& cfg = manifest.at("config");
    out.config.iterations = cfg.at("iterations").get<long>();
    out.config.burn_in = cfg.at("burn_in").get<long>();
    out.config.thin = cfg.at("thin").get<int>();
    out.config.chains = cfg.at("chains").get<int>();
    out.config.seed = cfg.at("seed").get<std::uint64_t>();
    out.config.adapt_window = cfg.at("adapt_window").get<int>();
    out.config.target_accept = cfg.at("target_accept").get<double>();
    out.layout = layout_from_json(manifest.at("layout"));
    const json& acc = manifest.at("acceptance");
    out.acceptance.block_names = acc.at("block_names").get<std::vector<std::string>>();
    out.acceptance.proposals = acc.at("proposals").get<std::vector<long>>();
    out.acceptance.accepts = acc.at("accepts").get<std::vector<long>>();
    out.acceptance.final_scales = acc.at("final_scales").get<std::vector<double>>();

    out.draws = read_csv(dir / "params.csv", &out.param_names);
    out.theta_draws = read_csv(dir / "theta.csv", &out.theta_names);
    Eigen::MatrixXd dv = read_csv(dir / "deviance.csv", nullptr);
    if (dv.cols() != 2 || dv.rows() != out.draws.rows())
        throw IoError("deviance.csv shape does not match params.csv");
    out.deviance = dv.col(0);
    out.log_post = dv.col(1);
    return out;
}

void write_checkpoint(const std::filesystem::path& path, const ChainState& state,
                      const ChainLayout& layout, long iteration) {
    json j;
    j["checkpoint_version"] = 1;
    j["iteration"] = iteration;
    j["layout"] = layout_to_json(layout);
    j["memberships"] = state.memberships;
    json theta = json::array();
    for (const auto& cls : state.theta.theta) {
        json items = json::array();
        for (const auto& p : cls) items.push_back(vec_to_json(p));
        theta.push_back(std::move(items));
    }
    j["theta"] = std::move(theta);
    json params;
    params["cutpoints"] = state.params.cutpoints;
    json eqs = json::array();
    for (const auto& e : state.params.eq)
        eqs.push_back(json{{"alpha0", e.alpha0},
                           {"alpha1", e.alpha1},
                           {"gamma", {e.gamma[0], e.gamma[1], e.gamma[2]}},
                           {"beta", e.beta},
                           {"w", vec_to_json(e.w)},
                           {"v", vec_to_json(e.v)}});
    params["eq"] = std::move(eqs);
    j["params"] = std::move(params);
    j["variances"] = {{"sigma_v", state.variances.sigma_v},
                      {"sigma_b", state.variances.sigma_b},
                      {"upper_bound", state.variances.upper_bound}};
    j["log_posterior"] = state.log_posterior;
    j["proposal_scales"] = state.proposal_scales;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write checkpoint " + path.string());
    f << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read checkpoint " + path.string());
    json j = json::parse(f);
    Checkpoint ck;
    ck.version = j.at("checkpoint_version").get<int>();
    if (ck.version != 1) throw IoError("unsupported checkpoint version");
    ck.iteration = j.at("iteration").get<long>();
    ck.layout = layout_from_json(j.at("layout"));
    ck.state.memberships = j.at("memberships").get<std::vector<int>>();
    for (const auto& cls : j.at("theta")) {
        std::vector<Eigen::VectorXd> items;
        for (const auto& p : cls) items.push_back(vec_from_json(p));
        ck.state.theta.theta.push_back(std::move(items));
    }
    const json& params = j.at("params");
    ck.state.params.link = ck.layout.link;
    ck.state.params.n_classes = ck.layout.n_classes;
    ck.state.params.use_marital = ck.layout.use_marital;
    ck.state.params.cutpoints = params.at("cutpoints").get<std::vector<double>>();
    for (const auto& e : params.at("eq")) {
        Effects eff;
        eff.alpha0 = e.at("alpha0").get<double>();
        eff.alpha1 = e.at("alpha1").get<double>();
        for (int g = 0; g < 3; ++g) eff.gamma[g] = e.at("gamma")[g].get<double>();
        eff.beta = e.at("beta").get<double>();
        eff.w = vec_from_json(e.at("w"));
        eff.v = vec_from_json(e.at("v"));
        ck.state.params.eq.push_back(std::move(eff));
    }
    const json& var = j.at("variances");
    ck.state.variances.sigma_v = var.at("sigma_v").get<std::vector<double>>();
    ck.state.variances.sigma_b = var.at("sigma_b").get<std::vector<double>>();
    ck.state.variances.upper_bound = var.at("upper_bound").get<double>();
    ck.state.log_posterior = j.at("log_posterior").get<double>();
    ck.state.proposal_scales = j.at("proposal_scales").get<std::vector<double>>();
    return ck;
}

void save_spline_design(const std::filesystem::path& path, const SplineDesign& design) {
    json j;
    j["kind"] = design.kind == SplineBasisKind::demmler_reinsch ? "demmler-reinsch" : "thin-plate";
    j["center"] = design.center;
    j["scale"] = design.scale;
    j["knots_std"] = vec_to_json(design.knots_std);
    j["prior_weight"] = vec_to_json(design.prior_weight);
    j["map"] = mat_to_json(design.map);
    j["X"] = mat_to_json(design.X);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

SplineDesign load_spline_design(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    json j = json::parse(f);
    SplineDesign d;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "demmler-reinsch")
        d.kind = SplineBasisKind::demmler_reinsch;
    else if (kind == "thin-plate")
        d.kind = SplineBasisKind::thin_plate;
    else
        throw IoError("unknown basis kind '" + kind + "'");
    d.center = j.at("center").get<double>();
    d.scale = j.at("scale").get<double>();
    d.knots_std = vec_from_json(j.at("knots_std"));
    d.prior_weight = vec_from_json(j.at("prior_weight"));
    d.map = mat_from_json(j.at("map"));
    d.X = mat_from_json(j.at("X"));
    return d;
}

}  // namespace lcsae
