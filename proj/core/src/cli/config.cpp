#include "eit/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "eit/errors.hpp"
#include "json.hpp"

namespace eit::cli {
namespace {

using json = nlohmann::json;

std::string layout_name(Layout layout) {
  return layout == Layout::EqualSectors ? "equal-sectors" : "annular-sectors";
}

// Strict object reader: records the keys it was asked for and rejects the rest.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    try {
      target = node_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name(key) + " has the wrong type");
    }
  }

  template <typename T>
  void require(const char* key, T& target) {
    if (!node_.contains(key)) throw ConfigError(name(key) + " is required");
    read(key, target);
  }

  bool has(const char* key) const { return node_.contains(key); }
  const json& at(const char* key) {
    seen_.insert(key);
    return node_.at(key);
  }

  void finish() const {
    for (const auto& item : node_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key " + name(item.key()));
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(domain.r0 > 0.0 && domain.r0 < 1.0)) throw ConfigError("domain.r0 must lie in (0, 1)");
  if (domain.regions < 1) throw ConfigError("domain.D must be >= 1");
  if (domain.layout == Layout::AnnularSectors) {
    if (domain.rings < 1 || domain.sectors_per_ring < 1)
      throw ConfigError("domain.rings and domain.sectors_per_ring must be >= 1");
    if (domain.rings * domain.sectors_per_ring != domain.regions)
      throw ConfigError("domain.rings * domain.sectors_per_ring must equal domain.D");
  }
  if (!(mesh.target_h > 0.0)) throw ConfigError("mesh.target_h must be > 0");
  if (electrodes.count < 1) throw ConfigError("electrodes.M must be >= 1");
  if (!(electrodes.coverage > 0.0 && electrodes.coverage <= 1.0))
    throw ConfigError("electrodes.coverage must lie in (0, 1]");
  if (!(model.gamma_min > 0.0)) throw ConfigError("gamma_min must be > 0");
  if (!(model.gamma_max >= model.gamma_min)) throw ConfigError("gamma_max must be >= gamma_min");
  if (static_cast<int>(model.theta0.size()) != domain.regions)
    throw ConfigError("model.theta0 must have D = " + std::to_string(domain.regions) + " entries");
  for (std::size_t k = 0; k < model.theta0.size(); ++k) {
    const std::string name = "model.theta0[" + std::to_string(k) + "]";
    if (model.theta0[k] < model.gamma_min)
      throw ConfigError(name + " = " + number(model.theta0[k]) + " is below gamma_min " +
                        number(model.gamma_min));
    if (model.theta0[k] > model.gamma_max)
      throw ConfigError(name + " = " + number(model.theta0[k]) + " exceeds gamma_max " +
                        number(model.gamma_max));
  }
  if (prior.kind == "truncated-gaussian") {
    if (static_cast<int>(prior.mean.size()) != domain.regions ||
        static_cast<int>(prior.sd.size()) != domain.regions)
      throw ConfigError("prior.mean and prior.sd must have D entries");
    for (double s : prior.sd)
      if (!(s > 0.0)) throw ConfigError("prior.sd entries must be > 0");
  } else if (prior.kind != "uniform") {
    throw ConfigError("prior.kind must be \"uniform\" or \"truncated-gaussian\"");
  }
  if (mcmc.iters < 1) throw ConfigError("mcmc.iters must be >= 1");
  if (mcmc.burnin < 0) throw ConfigError("mcmc.burnin must be >= 0");
  if (mcmc.iters <= mcmc.burnin) throw ConfigError("mcmc.iters must exceed mcmc.burnin");
  if (mcmc.thin < 1) throw ConfigError("mcmc.thin must be >= 1");
  if (!mcmc.step.empty() && mcmc.step.size() != 1 &&
      static_cast<int>(mcmc.step.size()) != domain.regions)
    throw ConfigError("mcmc.step must be a scalar or have D entries");
  for (double s : mcmc.step)
    if (!(s > 0.0)) throw ConfigError("mcmc.step entries must be > 0");
  if (mcmc.proposal != "laplace" && mcmc.proposal != "fixed")
    throw ConfigError("mcmc.proposal must be \"laplace\" or \"fixed\"");
  if (experiment.n < 1) throw ConfigError("experiment.N must be >= 1");
  if (experiment.replicates < 1) throw ConfigError("experiment.replicates must be >= 1");
  if (!(experiment.alpha > 0.0 && experiment.alpha < 1.0))
    throw ConfigError("experiment.alpha must lie in (0, 1)");
  for (std::size_t g = 0; g < experiment.n_grid.size(); ++g) {
    if (experiment.n_grid[g] < 1) throw ConfigError("experiment.N_grid entries must be >= 1");
    if (g > 0 && experiment.n_grid[g] <= experiment.n_grid[g - 1])
      throw ConfigError("experiment.N_grid must be strictly increasing");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

PartitionSpec ExperimentConfig::partition_spec() const {
  PartitionSpec spec;
  spec.regions = domain.regions;
  spec.r0 = domain.r0;
  spec.layout = domain.layout;
  spec.rings = domain.rings;
  spec.sectors_per_ring = domain.sectors_per_ring;
  return spec;
}

ParameterBox ExperimentConfig::box() const {
  return ParameterBox{domain.regions, model.gamma_min, model.gamma_max};
}

Theta ExperimentConfig::theta0() const {
  return Eigen::Map<const Eigen::VectorXd>(model.theta0.data(),
                                           static_cast<Eigen::Index>(model.theta0.size()));
}

PosteriorSettings ExperimentConfig::posterior_settings() const {
  PosteriorSettings s;
  s.prior.support = box();
  if (prior.kind == "truncated-gaussian") {
    s.prior.kind = PriorSpec::Kind::TruncatedGaussian;
    s.prior.mean = Eigen::Map<const Eigen::VectorXd>(prior.mean.data(), domain.regions);
    s.prior.sd = Eigen::Map<const Eigen::VectorXd>(prior.sd.data(), domain.regions);
  }
  s.iters = mcmc.iters;
  s.burnin = mcmc.burnin;
  s.thin = mcmc.thin;
  s.adapt = mcmc.adapt;
  s.proposal = mcmc.proposal == "fixed" ? ProposalKind::Fixed : ProposalKind::Laplace;
  if (mcmc.step.size() == 1)
    s.steps = Eigen::VectorXd::Constant(domain.regions, mcmc.step[0]);
  else if (!mcmc.step.empty())
    s.steps = Eigen::Map<const Eigen::VectorXd>(mcmc.step.data(), domain.regions);
  return s;
}

ForwardModel ExperimentConfig::build_model() const {
  const Partition partition = build_partition(partition_spec());
  Mesh grid = mesh_disk(partition, mesh.target_h, 4 * electrodes.count);
  ElectrodeSet set = place_electrodes(grid, electrodes.count, electrodes.coverage);
  return ForwardModel(std::move(grid), std::move(set), box());
}

ExperimentConfig parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Section top(root, "");
  if (top.has("domain")) {
    Section s(top.at("domain"), "domain");
    s.read("r0", cfg.domain.r0);
    s.read("D", cfg.domain.regions);
    std::string layout = layout_name(cfg.domain.layout);
    s.read("layout", layout);
    if (layout == "equal-sectors")
      cfg.domain.layout = Layout::EqualSectors;
    else if (layout == "annular-sectors")
      cfg.domain.layout = Layout::AnnularSectors;
    else
      throw ConfigError("domain.layout must be \"equal-sectors\" or \"annular-sectors\"");
    s.read("rings", cfg.domain.rings);
    s.read("sectors_per_ring", cfg.domain.sectors_per_ring);
    s.finish();
  }
  if (top.has("mesh")) {
    Section s(top.at("mesh"), "mesh");
    s.read("target_h", cfg.mesh.target_h);
    s.finish();
  }
  if (top.has("electrodes")) {
    Section s(top.at("electrodes"), "electrodes");
    s.read("M", cfg.electrodes.count);
    s.read("coverage", cfg.electrodes.coverage);
    s.finish();
  }
  {
    if (!top.has("model")) throw ConfigError("model is required");
    Section s(top.at("model"), "model");
    s.read("gamma_min", cfg.model.gamma_min);
    s.read("gamma_max", cfg.model.gamma_max);
    s.require("theta0", cfg.model.theta0);
    s.finish();
  }
  if (top.has("prior")) {
    Section s(top.at("prior"), "prior");
    s.read("kind", cfg.prior.kind);
    s.read("mean", cfg.prior.mean);
    s.read("sd", cfg.prior.sd);
    s.finish();
  }
  if (top.has("mcmc")) {
    Section s(top.at("mcmc"), "mcmc");
    s.read("iters", cfg.mcmc.iters);
    s.read("burnin", cfg.mcmc.burnin);
    s.read("thin", cfg.mcmc.thin);
    if (s.has("step")) {
      const json& step = s.at("step");
      if (step.is_number())
        cfg.mcmc.step = {step.get<double>()};
      else
        s.read("step", cfg.mcmc.step);
    }
    s.read("adapt", cfg.mcmc.adapt);
    s.read("proposal", cfg.mcmc.proposal);
    s.finish();
  }
  if (top.has("experiment")) {
    Section s(top.at("experiment"), "experiment");
    s.read("N", cfg.experiment.n);
    s.read("N_grid", cfg.experiment.n_grid);
    s.read("replicates", cfg.experiment.replicates);
    s.read("alpha", cfg.experiment.alpha);
    s.finish();
  }
  top.read("seed", cfg.seed);
  top.read("out_dir", cfg.out_dir);
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

namespace {

json to_json_value(const ExperimentConfig& c) {
  json j;
  j["domain"] = {{"r0", c.domain.r0},
                 {"D", c.domain.regions},
                 {"layout", layout_name(c.domain.layout)},
                 {"rings", c.domain.rings},
                 {"sectors_per_ring", c.domain.sectors_per_ring}};
  j["mesh"] = {{"target_h", c.mesh.target_h}};
  j["electrodes"] = {{"M", c.electrodes.count}, {"coverage", c.electrodes.coverage}};
  j["model"] = {{"gamma_min", c.model.gamma_min},
                {"gamma_max", c.model.gamma_max},
                {"theta0", c.model.theta0}};
  j["prior"] = {{"kind", c.prior.kind}, {"mean", c.prior.mean}, {"sd", c.prior.sd}};
  j["mcmc"] = {{"iters", c.mcmc.iters},         {"burnin", c.mcmc.burnin},
               {"thin", c.mcmc.thin},           {"step", c.mcmc.step},
               {"adapt", c.mcmc.adapt},         {"proposal", c.mcmc.proposal}};
  j["experiment"] = {{"N", c.experiment.n},
                     {"N_grid", c.experiment.n_grid},
                     {"replicates", c.experiment.replicates},
                     {"alpha", c.experiment.alpha}};
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  return j;
}

}  // namespace

std::string to_json(const ExperimentConfig& config, int indent) {
  return to_json_value(config).dump(indent);
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = to_json_value(config).dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << hash;
  return os.str();
}

}  // namespace eit::cli
