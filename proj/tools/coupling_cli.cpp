// Command-line front end: clustering, counterexample sweeps, elbow curves,
// embeddings and synthetic data. Exit codes: 0 ok, 2 config, 3 data, 4 solver.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coupling/coupling.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kData = 3, kSolver = 4 };

// Thrown for bad flag combinations detected before any data is read.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string algo = "nuclear";
  int k = 2;
  std::string pz;
  double lambda = 10.0;
  std::optional<double> alpha;
  std::uint64_t seed = 0;
  int restarts = 1;
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::string out = "coupling-out";
  std::string normalize = "joint";
  bool rating_transform = false;
  std::string truth;
  // counterexample
  int m = 50;
  int n = 50;
  std::string s_grid = "1:10:0.5";
  // elbow
  std::string ks = "1,2,3,4,5,6,7,8,9,10";
  // embed
  int d = 2;
  std::string method = "exact";
  // synth
  std::string gen = "planted";
  std::string variant = "base_P";
  double s = 2.0;
  int blocks = 3;
  int block_size = 20;
  double within = 1.0;
  double cross = 0.05;
  int threads = 1;

  json to_json() const {
    json j = {{"subcommand", subcommand}, {"seed", seed}, {"threads", threads}, {"out", out}};
    if (subcommand == "cluster" || subcommand == "elbow" || subcommand == "embed") {
      j["input"] = input;
      j["normalize"] = normalize;
      j["rating_transform"] = rating_transform;
    }
    if (subcommand == "cluster" || subcommand == "elbow") {
      j["algo"] = algo;
      j["lambda"] = lambda;
      j["restarts"] = restarts;
      j["alpha"] = alpha ? json(*alpha) : json(nullptr);
      j["tol"] = tol ? json(*tol) : json(nullptr);
      j["max_iters"] = max_iters ? json(*max_iters) : json(nullptr);
    }
    if (subcommand == "cluster") {
      j["k"] = k;
      j["pz"] = pz;
      j["truth"] = truth;
    }
    if (subcommand == "counterexample") j.update({{"m", m}, {"n", n}, {"s_grid", s_grid}, {"lambda", lambda}});
    if (subcommand == "elbow") j["ks"] = ks;
    if (subcommand == "embed") j.update({{"d", d}, {"method", method}});
    if (subcommand == "synth")
      j.update({{"gen", gen}, {"variant", variant}, {"m", m}, {"n", n}, {"s", s}, {"blocks", blocks},
                {"block_size", block_size}, {"within", within}, {"cross", cross}});
    return j;
  }
};

int threads_from_env() {
  const char* v = std::getenv("COUPLING_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long t = std::strtol(v, &end, 10);
  if (*end != '\0' || t < 1) throw ConfigError("COUPLING_THREADS must be a positive integer");
  return static_cast<int>(t);
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(std::stod(tok));
    if (parts.size() != 3 || parts[2] <= 0.0 || parts[1] < parts[0])
      throw ConfigError("grid must be lo:hi:step with step > 0 and hi >= lo");
    const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(parts[0] + static_cast<double>(i) * parts[2]);
  } else {
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

std::vector<Eigen::Index> parse_ks(const std::string& text) {
  std::vector<Eigen::Index> out;
  for (double v : parse_grid(text)) {
    if (v < 1 || v != std::floor(v)) throw ConfigError("k values must be positive integers");
    out.push_back(static_cast<Eigen::Index>(v));
  }
  return out;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << content;
}

void write_manifest(const RunConfig& cfg, const std::vector<std::string>& args) {
  const json m = {{"tool", "coupling"},
                  {"version", coupling::kVersion},
                  {"argv", args},
                  {"config", cfg.to_json()}};
  write_file(fs::path(cfg.out) / "manifest.json", m.dump(2) + "\n");
}

coupling::LoadResult load_input(const RunConfig& cfg) {
  coupling::LoadOptions opt;
  opt.normalize = cfg.normalize == "rows" ? coupling::Normalize::Rows : coupling::Normalize::Joint;
  opt.rating_transform = cfg.rating_transform;
  coupling::LoadResult r = coupling::load_joint(cfg.input, opt);
  if (!r.report.empty())
    std::cerr << "note: pruned " << r.report.pruned_rows.size() << " rows and " << r.report.pruned_cols.size()
              << " columns with zero mass\n";
  return r;
}

struct PhaseError {
  Exit code;
  std::string what;
};

// Runs `body` in the given phase, translating library errors to exit codes.
template <typename F>
void phase(Exit code, F&& body) {
  try {
    body();
  } catch (const ConfigError&) {
    throw;
  } catch (const coupling::Error& e) {
    throw PhaseError{code, e.what()};
  }
}

// ---------------------------------------------------------------------------

void cmd_cluster(const RunConfig& cfg) {
  const bool frob = cfg.algo == "frobenius";
  if (frob && cfg.pz.empty()) throw ConfigError("--algo frobenius needs --pz FILE or --pz uniform");
  if (!frob && !cfg.pz.empty()) throw ConfigError("--pz is only valid with --algo frobenius");
  if (cfg.k < 1) throw ConfigError("--k must be >= 1");
  if (cfg.restarts < 1) throw ConfigError("--restarts must be >= 1");

  coupling::FrobeniusConfig fc;
  fc.lambda = cfg.lambda;
  fc.alpha = cfg.alpha;
  fc.seed = cfg.seed;
  if (cfg.tol) fc.obj_tol = *cfg.tol;
  if (cfg.max_iters) fc.max_iters = *cfg.max_iters;
  coupling::NuclearConfig nc;
  nc.k = cfg.k;
  nc.seed = cfg.seed;
  if (cfg.tol) nc.kernel_change_tol = *cfg.tol;
  if (cfg.max_iters) nc.max_iters = *cfg.max_iters;
  phase(kConfig, [&] {
    if (frob) fc.validate();
    else nc.validate(std::numeric_limits<Eigen::Index>::max());
  });

  std::optional<coupling::LoadResult> data;
  std::optional<coupling::Pmf> p_z;
  std::vector<std::string> truth;
  phase(kData, [&] {
    data.emplace(load_input(cfg));
    if (frob) {
      p_z.emplace(cfg.pz == "uniform" ? coupling::Pmf::uniform(coupling::make_labels("z", cfg.k))
                                      : coupling::load_pmf(cfg.pz));
    }
    if (!cfg.truth.empty()) {
      std::map<std::string, std::string> by_item;
      for (auto& [item, cl] : coupling::load_assignments(cfg.truth)) by_item[item] = cl;
      for (const auto& item : data->joint.row_labels()) {
        auto it = by_item.find(item);
        coupling::require(it != by_item.end(), coupling::ErrorCode::LabelMismatch,
                          "no truth label for item '" + item + "'");
        truth.push_back(it->second);
      }
    }
  });
  const coupling::JointPmf& joint = data->joint;

  std::optional<coupling::CouplingKernel> kernel;
  std::vector<coupling::TraceRow> trace;
  double objective = 0.0, norm_value = 0.0;
  int iters = 0;
  phase(kSolver, [&] {
    if (frob) {
      coupling::FrobeniusResult r = coupling::solve_frobenius_restarts(joint, *p_z, fc, cfg.restarts);
      for (const auto& w : r.trace.warnings) std::cerr << "warning: " << w << '\n';
      if (r.trace.status == coupling::SolveStatus::MaxIters)
        std::cerr << "warning: stopped at the iteration limit before converging\n";
      for (std::size_t i = 0; i < r.trace.records.size(); ++i) {
        const auto& t = r.trace.records[i];
        trace.push_back({static_cast<int>(i + 1), t.objective, t.penalty, t.violation});
      }
      objective = r.objective;
      iters = static_cast<int>(r.trace.records.size());
      norm_value = coupling::kernel_norms(r.kernel, joint).frobenius_sq;
      kernel.emplace(std::move(r.kernel));
    } else {
      coupling::NuclearResult r = coupling::solve_nuclear_restarts(joint, nc, cfg.restarts);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      for (std::size_t i = 0; i < r.trace.size(); ++i)
        trace.push_back({static_cast<int>(i + 1), r.trace[i].nuclear_norm, 0.0, 0.0});
      objective = r.nuclear_norm;
      norm_value = r.nuclear_norm;
      iters = static_cast<int>(r.trace.size());
      kernel.emplace(std::move(r.kernel));
    }
  });

  const Eigen::VectorXd realized = kernel->matrix() * joint.marginal_y().probs();
  write_file(fs::path(cfg.out) / "kernel.json",
             coupling::kernel_json({*kernel, realized, objective, cfg.algo, iters}).dump(2) + "\n");
  std::ostringstream tcsv;
  coupling::write_trace_csv(tcsv, trace);
  write_file(fs::path(cfg.out) / "trace.csv", tcsv.str());

  const auto assignment = coupling::harden(*kernel);
  json report = {{"algorithm", cfg.algo}, {"k", kernel->clusters()}, {"objective", objective},
                 {"norm_value", norm_value}, {"iterations", iters}};
  std::vector<int> sizes(static_cast<std::size_t>(kernel->clusters()), 0);
  for (auto a : assignment) ++sizes[static_cast<std::size_t>(a)];
  report["cluster_sizes"] = sizes;
  if (!truth.empty()) {
    phase(kData, [&] {
      const coupling::ClusteringReport r = coupling::make_report(
          assignment, truth, kernel->clusters(), norm_value, frob ? "frobenius_sq" : "nuclear");
      report["evaluation"] = r.to_json();
      coupling::write_report_table(std::cout, {r});
    });
  } else {
    std::cout << "algorithm  " << cfg.algo << "\nk          " << kernel->clusters() << "\nnorm       "
              << coupling::format_double(norm_value) << "\niterations " << iters << "\nsizes     ";
    for (int sz : sizes) std::cout << ' ' << sz;
    std::cout << '\n';
  }
  write_file(fs::path(cfg.out) / "report.json", report.dump(2) + "\n");
}

void cmd_counterexample(const RunConfig& cfg) {
  if (cfg.m < 2 || cfg.n < 2) throw ConfigError("--m and --n must be >= 2");
  if (!(cfg.lambda > 0.0)) throw ConfigError("--lambda must be > 0");
  const std::vector<double> grid = parse_grid(cfg.s_grid);
  for (double s : grid)
    if (s < 1.0) throw ConfigError("s values must be >= 1");

  std::ostringstream csv;
  csv << "s,frob_intuitive,frob_oneitem,community_obj_Q1,community_obj_Q2\n";
  phase(kSolver, [&] {
    using coupling::CounterexampleVariant;
    for (double s : grid) {
      const Eigen::MatrixXd p = coupling::gen_counterexample({cfg.m, cfg.n, s, CounterexampleVariant::BaseP});
      const Eigen::MatrixXd q1 = coupling::gen_counterexample({cfg.m, cfg.n, s, CounterexampleVariant::IntuitiveQ1});
      const Eigen::MatrixXd q2 = coupling::gen_counterexample({cfg.m, cfg.n, s, CounterexampleVariant::OneItemQ2});
      csv << coupling::format_double(s) << ','
          << coupling::format_double(coupling::counterexample_frobenius(cfg.m, cfg.n, s, coupling::CounterexampleKernel::Intuitive))
          << ','
          << coupling::format_double(coupling::counterexample_frobenius(cfg.m, cfg.n, s, coupling::CounterexampleKernel::OneItem))
          << ',' << coupling::format_double(coupling::community_objective(q1, p, cfg.lambda, 2)) << ','
          << coupling::format_double(coupling::community_objective(q2, p, cfg.lambda, 2)) << '\n';
    }
  });
  write_file(fs::path(cfg.out) / "counterexample.csv", csv.str());
  std::cout << csv.str();
}

void cmd_elbow(const RunConfig& cfg) {
  const std::vector<Eigen::Index> ks = parse_ks(cfg.ks);
  if (cfg.restarts < 1) throw ConfigError("--restarts must be >= 1");
  std::optional<coupling::LoadResult> data;
  phase(kData, [&] { data.emplace(load_input(cfg)); });
  coupling::ElbowCurve curve;
  phase(kSolver, [&] {
    coupling::ElbowOptions opt;
    opt.algorithm = cfg.algo == "frobenius" ? coupling::Algorithm::Frobenius : coupling::Algorithm::Nuclear;
    opt.restarts = cfg.restarts;
    opt.seed = cfg.seed;
    opt.frobenius.lambda = cfg.lambda;
    opt.frobenius.alpha = cfg.alpha;
    if (cfg.tol) {
      opt.frobenius.obj_tol = *cfg.tol;
      opt.nuclear.kernel_change_tol = *cfg.tol;
    }
    if (cfg.max_iters) {
      opt.frobenius.max_iters = *cfg.max_iters;
      opt.nuclear.max_iters = *cfg.max_iters;
    }
    curve = coupling::elbow_curve(data->joint, ks, opt);
  });
  for (const auto& v : curve.violations) std::cerr << "warning: " << v << '\n';
  std::ostringstream csv;
  csv << "k,value\n";
  for (const auto& p : curve.points) csv << p.k << ',' << coupling::format_double(p.value) << '\n';
  write_file(fs::path(cfg.out) / "elbow.csv", csv.str());
  std::cout << csv.str();
}

void cmd_embed(const RunConfig& cfg) {
  if (cfg.d < 1) throw ConfigError("--d must be >= 1");
  if (cfg.d == 1)
    std::cerr << "warning: d = 1 keeps only the trivial top pair; the embedding is the constant column 1\n";
  std::optional<coupling::LoadResult> data;
  phase(kData, [&] { data.emplace(load_input(cfg)); });
  std::optional<coupling::EmbeddingMatrix> emb;
  // failures here are rank or support limits of the data itself
  phase(kData, [&] {
    coupling::SubspaceIterationOptions opt;
    opt.seed = cfg.seed;
    emb.emplace(coupling::dtm_embed(data->joint, cfg.d,
                                    cfg.method == "power" ? coupling::EmbedMethod::PowerIteration
                                                          : coupling::EmbedMethod::ExactSvd,
                                    opt));
  });
  std::ostringstream tsv;
  coupling::write_embedding_tsv(tsv, *emb);
  write_file(fs::path(cfg.out) / "embedding.tsv", tsv.str());
  std::cout << tsv.str();
}

void cmd_synth(const RunConfig& cfg) {
  std::ostringstream tsv;
  phase(kConfig, [&] {
    if (cfg.gen == "counterexample") {
      const Eigen::MatrixXd q =
          coupling::gen_counterexample({cfg.m, cfg.n, cfg.s, coupling::parse_variant(cfg.variant)});
      // every cell, zeros included, so the file shows the full matrix
      for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < q.cols(); ++j)
          tsv << 'y' << i << "\tx" << j << '\t' << coupling::format_double(q(i, j)) << '\n';
    } else {
      coupling::PlantedParams p =
          coupling::planted_blocks(cfg.blocks, cfg.block_size, cfg.within, cfg.cross, cfg.seed);
      const coupling::PlantedData d = coupling::gen_planted_blocks(p);
      coupling::write_triplets(tsv, d.joint);
      std::ostringstream truth;
      for (std::size_t i = 0; i < d.truth.size(); ++i)
        truth << d.joint.row_labels()[i] << "\tb" << d.truth[i] << '\n';
      write_file(fs::path(cfg.out) / "truth.tsv", truth.str());
    }
  });
  write_file(fs::path(cfg.out) / "triplets.tsv", tsv.str());
  std::cout << tsv.str();
}

int run(const std::vector<std::string>& args);

// Re-executes the argv recorded in a manifest, optionally into another directory.
int cmd_replay(const std::string& manifest, const std::optional<std::string>& out) {
  json m;
  try {
    std::ifstream f(manifest);
    if (!f) throw ConfigError("cannot open manifest '" + manifest + "'");
    m = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
  if (m.value("version", "") != coupling::kVersion)
    std::cerr << "warning: manifest was written by version " << m.value("version", "?") << '\n';
  std::vector<std::string> args = m.at("argv").get<std::vector<std::string>>();
  if (out) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
      if (args[i] == "--out") {
        args[i + 1] = *out;
        replaced = true;
      }
    if (!replaced) {
      args.push_back("--out");
      args.push_back(*out);
    }
  }
  return run(args);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Clustering by coupled distributions and DTM spectra"};
  app.require_subcommand(1);
  app.set_version_flag("--version", coupling::kVersion);
  RunConfig cfg;

  auto add_data_flags = [&](CLI::App* sub) {
    sub->add_option("input", cfg.input, "joint distribution (.csv dense, otherwise triplets)")->required();
    sub->add_option("--normalize", cfg.normalize, "joint | rows")->check(CLI::IsMember({"joint", "rows"}));
    sub->add_flag("--rating-transform", cfg.rating_transform, "map 1..5 ratings through 3^(r-1) - 1");
  };
  auto add_solver_flags = [&](CLI::App* sub) {
    sub->add_option("--algo", cfg.algo, "frobenius | nuclear")->check(CLI::IsMember({"frobenius", "nuclear"}));
    sub->add_option("--lambda", cfg.lambda, "marginal penalty weight");
    sub->add_option("--alpha", cfg.alpha, "gradient step size");
    sub->add_option("--restarts", cfg.restarts, "random restarts (best kept)");
    sub->add_option("--tol", cfg.tol, "convergence tolerance");
    sub->add_option("--max-iters", cfg.max_iters, "iteration limit");
  };
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--out", cfg.out, "output directory");
  };

  auto* cluster = app.add_subcommand("cluster", "cluster items; writes kernel.json and trace.csv");
  add_data_flags(cluster);
  add_solver_flags(cluster);
  add_common(cluster);
  cluster->add_option("--k", cfg.k, "number of clusters");
  cluster->add_option("--pz", cfg.pz, "target cluster marginal: file (label<TAB>prob) or 'uniform'");
  cluster->add_option("--truth", cfg.truth, "item<TAB>label ground truth for the report");

  auto* counter = app.add_subcommand("counterexample", "Frobenius and community objectives over s");
  counter->add_option("--m", cfg.m, "items per community");
  counter->add_option("--n", cfg.n, "features per community");
  counter->add_option("--s", cfg.s_grid, "s grid: lo:hi:step or comma list");
  counter->add_option("--lambda", cfg.lambda, "community objective weight");
  add_common(counter);

  auto* elbow = app.add_subcommand("elbow", "norm value against k");
  add_data_flags(elbow);
  add_solver_flags(elbow);
  add_common(elbow);
  elbow->add_option("--ks", cfg.ks, "k values: comma list or lo:hi:step");

  auto* embed = app.add_subcommand("embed", "item embedding from the DTM's left singular vectors");
  add_data_flags(embed);
  add_common(embed);
  embed->add_option("--d", cfg.d, "embedding dimension");
  embed->add_option("--method", cfg.method, "exact | power")->check(CLI::IsMember({"exact", "power"}));

  auto* synth = app.add_subcommand("synth", "synthetic joint distributions as triplets");
  add_common(synth);
  synth->add_option("--gen", cfg.gen, "planted | counterexample")->check(CLI::IsMember({"planted", "counterexample"}));
  synth->add_option("--variant", cfg.variant, "base_P | intuitive_Q1 | one_item_Q2");
  synth->add_option("--m", cfg.m, "counterexample items per community");
  synth->add_option("--n", cfg.n, "counterexample features per community");
  synth->add_option("--s", cfg.s, "counterexample within-community weight");
  synth->add_option("--blocks", cfg.blocks, "planted block count");
  synth->add_option("--size", cfg.block_size, "planted items per block");
  synth->add_option("--within", cfg.within, "planted within-block weight");
  synth->add_option("--cross", cfg.cross, "planted cross-block weight");

  std::string manifest;
  std::optional<std::string> replay_out;
  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("manifest", manifest, "manifest.json from an earlier run")->required();
  replay->add_option("--out", replay_out, "output directory (defaults to the recorded one)");

  std::vector<const char*> argv{"coupling"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (replay->parsed()) return cmd_replay(manifest, replay_out);
    cfg.subcommand = app.get_subcommands().front()->get_name();
    cfg.threads = threads_from_env();
    fs::create_directories(cfg.out);
    write_manifest(cfg, args);
    if (cfg.subcommand == "cluster") cmd_cluster(cfg);
    else if (cfg.subcommand == "counterexample") cmd_counterexample(cfg);
    else if (cfg.subcommand == "elbow") cmd_elbow(cfg);
    else if (cfg.subcommand == "embed") cmd_embed(cfg);
    else cmd_synth(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const PhaseError& e) {
    std::cerr << (e.code == kData ? "data error: " : e.code == kSolver ? "solver error: " : "config error: ")
              << e.what << '\n';
    return e.code;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: malformed number in a list option\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return run(std::vector<std::string>(argv + 1, argv + argc));
}
