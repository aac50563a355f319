#include "lcsae/config.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "lcsae/rng.hpp"

namespace lcsae {

using json = nlohmann::ordered_json;

namespace {

const char* sd_prior_label(SdPriorType t) {
    switch (t) {
        case SdPriorType::uniform: return "uniform";
        case SdPriorType::half_cauchy: return "half-cauchy";
        case SdPriorType::inv_gamma: return "inv-gamma";
    }
    return "?";
}

SdPriorType parse_sd_prior(const std::string& s) {
    if (s == "uniform") return SdPriorType::uniform;
    if (s == "half-cauchy") return SdPriorType::half_cauchy;
    if (s == "inv-gamma") return SdPriorType::inv_gamma;
    throw ConfigError("unknown sd prior '" + s + "'");
}

json sd_prior_to_json(const SdPrior& p) {
    return json{{"type", sd_prior_label(p.type)},
                {"B", p.B},
                {"scale", p.scale},
                {"a", p.a},
                {"b", p.b}};
}

SdPrior sd_prior_from_json(const json& j) {
    SdPrior p;
    if (j.contains("type")) p.type = parse_sd_prior(j.at("type").get<std::string>());
    if (j.contains("B")) p.B = j.at("B").get<double>();
    if (j.contains("scale")) p.scale = j.at("scale").get<double>();
    if (j.contains("a")) p.a = j.at("a").get<double>();
    if (j.contains("b")) p.b = j.at("b").get<double>();
    return p;
}

json config_to_json(const RunConfig& c) {
    json items = json::array();
    for (const auto& it : c.schema.items)
        items.push_back(json{{"name", it.name}, {"categories", it.categories}});
    return json{
        {"paths",
         {{"responses", c.responses_path.string()},
          {"cells", c.cells_path.string()},
          {"output_dir", c.output_dir.string()}}},
        {"data",
         {{"items", items},
          {"age_class_min", c.age_classes.min_age},
          {"age_class_breaks", c.age_classes.breaks},
          {"n_districts", c.n_districts}}},
        {"model",
         {{"classes", c.model.n_classes},
          {"link", link_label(c.model.link)},
          {"use_marital", c.model.use_marital},
          {"knots", c.model.n_knots},
          {"basis", c.model.basis_kind == SplineBasisKind::demmler_reinsch ? "demmler-reinsch"
                                                                           : "thin-plate"}}},
        {"prior",
         {{"dirichlet_conc", c.prior.dirichlet_conc},
          {"reg_prior_var", c.prior.reg_prior_var},
          {"sigma_b", sd_prior_to_json(c.prior.sigma_b_prior)},
          {"sigma_v", sd_prior_to_json(c.prior.sigma_v_prior)}}},
        {"sampler",
         {{"iterations", c.sampler.iterations},
          {"burn_in", c.sampler.burn_in},
          {"thin", c.sampler.thin},
          {"chains", c.sampler.chains},
          {"seed", c.sampler.seed},
          {"adapt_window", c.sampler.adapt_window},
          {"target_accept", c.sampler.target_accept}}}};
}

}  // namespace

void RunConfig::validate() const {
    schema.validate();
    if (n_districts < 1) throw ConfigError("n_districts must be >= 1");
    if (model.n_classes < 1) throw ConfigError("classes must be >= 1");
    if (model.n_knots < 1) throw ConfigError("knots must be >= 1");
    prior.validate();
    sampler.validate();
    if (!responses_path.empty() && responses_path == cells_path)
        throw ConfigError("responses and cells paths must differ");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    RunConfig c;
    try {
        if (j.contains("paths")) {
            const json& p = j.at("paths");
            if (p.contains("responses")) c.responses_path = p.at("responses").get<std::string>();
            if (p.contains("cells")) c.cells_path = p.at("cells").get<std::string>();
            if (p.contains("output_dir")) c.output_dir = p.at("output_dir").get<std::string>();
        }
        if (j.contains("data")) {
            const json& d = j.at("data");
            if (d.contains("items"))
                for (const auto& it : d.at("items"))
                    c.schema.items.push_back({it.at("name").get<std::string>(),
                                              it.at("categories").get<int>()});
            if (d.contains("age_class_min"))
                c.age_classes.min_age = d.at("age_class_min").get<int>();
            if (d.contains("age_class_breaks"))
                c.age_classes.breaks = d.at("age_class_breaks").get<std::vector<int>>();
            if (d.contains("n_districts")) c.n_districts = d.at("n_districts").get<int>();
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            if (m.contains("classes")) c.model.n_classes = m.at("classes").get<int>();
            if (m.contains("link")) c.model.link = parse_link(m.at("link").get<std::string>());
            if (m.contains("use_marital")) c.model.use_marital = m.at("use_marital").get<bool>();
            if (m.contains("knots")) c.model.n_knots = m.at("knots").get<int>();
            if (m.contains("basis")) {
                std::string b = m.at("basis").get<std::string>();
                if (b == "demmler-reinsch")
                    c.model.basis_kind = SplineBasisKind::demmler_reinsch;
                else if (b == "thin-plate")
                    c.model.basis_kind = SplineBasisKind::thin_plate;
                else
                    throw ConfigError("unknown basis '" + b + "'");
            }
        }
        if (j.contains("prior")) {
            const json& p = j.at("prior");
            if (p.contains("dirichlet_conc"))
                c.prior.dirichlet_conc = p.at("dirichlet_conc").get<double>();
            if (p.contains("reg_prior_var"))
                c.prior.reg_prior_var = p.at("reg_prior_var").get<double>();
            if (p.contains("sigma_b")) c.prior.sigma_b_prior = sd_prior_from_json(p.at("sigma_b"));
            if (p.contains("sigma_v")) c.prior.sigma_v_prior = sd_prior_from_json(p.at("sigma_v"));
        }
        if (j.contains("sampler")) {
            const json& s = j.at("sampler");
            if (s.contains("iterations")) c.sampler.iterations = s.at("iterations").get<long>();
            if (s.contains("burn_in")) c.sampler.burn_in = s.at("burn_in").get<long>();
            if (s.contains("thin")) c.sampler.thin = s.at("thin").get<int>();
            if (s.contains("chains")) c.sampler.chains = s.at("chains").get<int>();
            if (s.contains("seed")) c.sampler.seed = s.at("seed").get<std::uint64_t>();
            if (s.contains("adapt_window"))
                c.sampler.adapt_window = s.at("adapt_window").get<int>();
            if (s.contains("target_accept"))
                c.sampler.target_accept = s.at("target_accept").get<double>();
        }
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    return c;
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write config " + path.string());
    f << config_to_json(config).dump(2) << "\n";
}

std::string config_hash(const RunConfig& config) {
    json j = config_to_json(config);
    j["paths"].erase("output_dir");
    std::string s = j.dump();
    // FNV-1a 64-bit, folded through the seed mixer for avalanche
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    h = derive_seed(h, 0);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lcsae
