// hmlab: batch front end for the Hardy martingale experiments.
//
//   hmlab verify <suite> [--config cfg.json] [--seed N] [--out-dir DIR] ...
//   hmlab gen --depth 2 --m 32 --seed 7 --out-dir fixtures
//   hmlab norms [--input manifest.json]
//   hmlab decompose [--input F.json] [--dyadic D.json] --paths 5000
//   hmlab embed --levels 2 --m 4096
//   hmlab report --out-dir DIR
//
// Exit status: 0 all asserted rows pass, 1 an asserted row fails,
// 2 configuration or input error, 3 resource cap (e.g. grid too small).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hmlab/harness.hpp"

namespace fs = std::filesystem;
using namespace hmlab;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> threads, m, depth, paths, samples, levels, pairs;
  std::optional<double> C0, dt, eps, A0;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "experiment config JSON");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--out-dir", f.out_dir, "output directory");
  app->add_option("--threads", f.threads, "worker cap (0 = all cores)");
  app->add_option("--m", f.m, "grid size");
  app->add_option("--depth", f.depth, "martingale depth");
  app->add_option("--paths", f.paths, "Monte-Carlo paths per truncation");
  app->add_option("--samples", f.samples, "instances per suite");
  app->add_option("--C0", f.C0, "stopping level constant");
  app->add_option("--dt", f.dt, "Euler step");
  app->add_option("--levels", f.levels, "frequency ladder levels");
  app->add_option("--eps", f.eps, "ladder accuracy");
  app->add_option("--pairs", f.pairs, "embedding distance pairs");
  app->add_option("--A0", f.A0, "measured A0 for the embedding suite");
}

ExperimentConfig load_config(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    if (!is) throw ConfigError({"config: cannot open '" + f.config + "'"});
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError({std::string("config: malformed JSON: ") + e.what()});
    }
    c = config_from_json(j);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out_dir) c.out_dir = *f.out_dir;
  if (f.threads) c.threads = *f.threads;
  if (f.m) c.m = *f.m;
  if (f.depth) c.depth = *f.depth;
  if (f.paths) c.n_paths = *f.paths;
  if (f.samples) c.samples = *f.samples;
  if (f.C0) c.C0 = *f.C0;
  if (f.dt) c.dt = *f.dt;
  if (f.levels) c.levels = *f.levels;
  if (f.eps) c.eps = *f.eps;
  if (f.pairs) c.pairs = *f.pairs;
  if (f.A0) c.A0 = *f.A0;
  return c;
}

std::optional<fs::path> cache_dir() {
  const char* env = std::getenv("HM_LAB_CACHE");
  if (!env || !*env) return std::nullopt;
  fs::path p(env);
  std::error_code ec;
  fs::create_directories(p, ec);
  return p;
}

void print_summary(const RunReport& rep, std::ostream& os) {
  for (const auto& w : rep.warnings) os << "warning: " << w << "\n";
  int asserted = 0, failed = 0;
  for (const auto& r : rep.rows.rows) {
    if (r.kind != RowKind::Asserted) continue;
    ++asserted;
    if (!r.pass) {
      ++failed;
      os << "FAIL " << r.suite << "/" << r.check << " value=" << fmt_num(r.value) << " slack=" << fmt_num(r.slack)
         << " tol=" << fmt_num(r.tolerance) << "\n";
    }
  }
  os << asserted - failed << "/" << asserted << " asserted checks pass, " << rep.rows.rows.size() - asserted
     << " reported; config " << rep.config_hash << ", " << fmt_num(rep.wall_seconds) << " s\n";
}

Martingale random_fixture(const ExperimentConfig& c, bool dyadic) {
  const int m = c.m > 0 ? c.m : 32, depth = c.depth > 0 ? c.depth : 2;
  if (dyadic) return random_dyadic(m, depth, c.seed);
  HardyConfig hc;
  hc.m = m;
  hc.depth = depth;
  hc.degree = std::max(1, std::min(2, m / 8));
  hc.seed = c.seed;
  return random_hardy(hc);
}

void check_fixture_config(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  const int m = c.m > 0 ? c.m : 32, depth = c.depth > 0 ? c.depth : 2;
  if (depth > kDepthCap)
    bad.push_back("depth_cap: depth " + std::to_string(depth) + " exceeds " + std::to_string(kDepthCap));
  if (depth < 1) bad.push_back("depth: must be positive");
  if (m < 8 || (m & (m - 1)) != 0) bad.push_back("m: must be a power of two >= 8");
  if (bad.empty() && ipow(m, depth) > (1u << 24)) bad.push_back("m: m^depth exceeds 2^24");
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

int cmd_verify(const std::string& suite, const Flags& f) {
  ExperimentConfig c = load_config(f);
  c.suite = suite;
  const RunReport rep = run(c);
  write_report(rep, c.out_dir, suite);
  print_summary(rep, std::cout);
  return rep.all_pass() ? kExitPass : kExitFail;
}

int cmd_gen(const Flags& f, const std::string& kind) {
  ExperimentConfig c = load_config(f);
  check_fixture_config(c);
  const fs::path out = c.out_dir;
  auto emit = [&](bool dyadic) {
    const std::string stem = dyadic ? "dyadic" : "hardy";
    const Martingale F = random_fixture(c, dyadic);
    if (auto cache = cache_dir()) {
      // reuse a cached copy keyed by the generator inputs
      const std::string key = stem + "_m" + std::to_string(F.grid().size()) + "_d" + std::to_string(F.depth()) +
                              "_s" + std::to_string(c.seed);
      const fs::path cached = *cache / key;
      if (!fs::exists(cached / (stem + ".json"))) write_martingale(F, cached, stem);
      std::error_code ec;
      fs::create_directories(out, ec);
      for (const auto& e : fs::directory_iterator(cached))
        fs::copy_file(e.path(), out / e.path().filename(), fs::copy_options::overwrite_existing);
      std::cout << (out / (stem + ".json")).string() << " (cache " << cached.string() << ")\n";
      return;
    }
    std::cout << write_martingale(F, out, stem).string() << "\n";
  };
  if (kind == "hardy" || kind == "both") emit(false);
  if (kind == "dyadic" || kind == "both") emit(true);
  return kExitPass;
}

Martingale load_or_generate(const std::string& input, const ExperimentConfig& c, bool dyadic) {
  if (!input.empty()) return read_martingale(input);
  check_fixture_config(c);
  return random_fixture(c, dyadic);
}

int cmd_norms(const Flags& f, const std::string& input) {
  const ExperimentConfig c = load_config(f);
  const Martingale F = load_or_generate(input, c, false);
  std::cout << "norm,value\n";
  std::cout << "L1," << fmt_num(norm_L1(F)) << "\n";
  std::cout << "H1," << fmt_num(norm_H1(F)) << "\n";
  std::cout << "P," << fmt_num(norm_P(F)) << "\n";
  std::cout << "A," << fmt_num(norm_A(F)) << "\n";
  std::cout << "maximal," << fmt_num(maximal_norm(F)) << "\n";
  std::cout << "hardy," << (is_hardy(F) ? 1 : 0) << "\n";
  std::cout << "dyadic," << (is_dyadic(F) ? 1 : 0) << "\n";
  return kExitPass;
}

int cmd_decompose(const Flags& f, const std::string& input, const std::string& dyadic) {
  ExperimentConfig c = load_config(f);
  c.suite = "dgi";
  c.validate();
  const Martingale F = load_or_generate(input, c, false);
  const Martingale D = dyadic.empty() ? dyadic_project(F) : read_martingale(dyadic);
  const DecompositionReport dec = decompose(F, D, c.mc_for("dgi", c.seed));
  RunReport rep;
  rep.rows = verify_dgi(dec, c.seed);
  rep.warnings = c.warnings;
  rep.config = config_echo(c);
  rep.config_hash = config_hash(c);
  rep.seed = c.seed;
  rep.wall_seconds = dec.wall_seconds;
  write_report(rep, c.out_dir, "decompose");
  write_martingale(dec.G, c.out_dir, "G");
  write_martingale(dec.B, c.out_dir, "B");
  print_summary(rep, std::cout);
  return rep.all_pass() ? kExitPass : kExitFail;
}

int cmd_embed(const Flags& f) {
  ExperimentConfig c = load_config(f);
  c.suite = "embedding";
  c.validate();
  const TorusGrid g(c.m_for("embedding"));
  std::optional<FrequencyLadder> L;
  fs::path cached;
  if (auto cache = cache_dir()) {
    cached = *cache / ("ladder_l" + std::to_string(c.levels) + "_m" + std::to_string(g.size()) + "_eps" +
                       fmt_num(c.eps) + ".json");
    if (fs::exists(cached)) {
      std::ifstream is(cached);
      L = ladder_from_json(nlohmann::json::parse(is));
    }
  }
  if (!L) L = build_ladder(c.levels, c.eps, g);
  if (!cached.empty() && !fs::exists(cached)) std::ofstream(cached) << to_json(*L).dump(2) << "\n";
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  std::ofstream(fs::path(c.out_dir) / "ladder.json") << to_json(*L).dump(2) << "\n";
  RunReport rep;
  rep.rows = verify_ladder(*L, c.seed);
  rep.rows.append(verify_small(*L, c.seed));
  rep.config = config_echo(c);
  rep.config_hash = config_hash(c);
  rep.seed = c.seed;
  write_report(rep, c.out_dir, "embed");
  std::cout << to_json(*L).dump() << "\n";
  print_summary(rep, std::cout);
  return rep.all_pass() ? kExitPass : kExitFail;
}

// Re-reads JSON reports and re-derives the exit status from their rows.
int cmd_report(const Flags& f) {
  const std::string dir = f.out_dir.value_or("hmlab_out");
  if (!fs::is_directory(dir)) throw ConfigError({"out_dir: '" + dir + "' is not a directory"});
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json" && fs::exists(fs::path(e.path()).replace_extension(".csv")))
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  int failed = 0;
  std::cout << "report,asserted,failed,reported,config_hash\n";
  for (const auto& p : files) {
    std::ifstream is(p);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::IOError, "malformed report " + p.string());
    }
    int a = 0, fl = 0, r = 0;
    for (const auto& row : j.value("rows", nlohmann::json::array())) {
      if (row.value("kind", "") == "asserted") {
        ++a;
        fl += row.value("status", "") == "fail";
      } else {
        ++r;
      }
    }
    failed += fl;
    std::cout << p.stem().string() << "," << a << "," << fl << "," << r << "," << j.value("config_hash", "") << "\n";
  }
  return failed ? kExitFail : kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardy martingale experiment runner"};
  app.require_subcommand(1);
  Flags flags;
  std::string suite, input, dyadic, kind = "hardy";

  auto* verify = app.add_subcommand("verify", "run a suite and write <suite>.csv/.json");
  verify->add_option("suite", suite, "identities|norms|outer|truncation|dgi|interpolatory|distance|embedding|all")
      ->required();
  add_common(verify, flags);

  auto* gen = app.add_subcommand("gen", "write seeded random martingale fixtures");
  gen->add_option("--kind", kind, "hardy|dyadic|both");
  add_common(gen, flags);

  auto* norms = app.add_subcommand("norms", "norm table of a martingale");
  norms->add_option("--input", input, "martingale manifest (default: random Hardy)");
  add_common(norms, flags);

  auto* dec = app.add_subcommand("decompose", "Davis-Garsia decomposition of F against D");
  dec->add_option("--input", input, "Hardy martingale manifest (default: random)");
  dec->add_option("--dyadic", dyadic, "dyadic martingale manifest (default: E_D F)");
  add_common(dec, flags);

  auto* embed = app.add_subcommand("embed", "build and check a frequency ladder");
  add_common(embed, flags);

  auto* report = app.add_subcommand("report", "summarise reports in --out-dir");
  add_common(report, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*verify) return cmd_verify(suite, flags);
    if (*gen) {
      if (kind != "hardy" && kind != "dyadic" && kind != "both") throw ConfigError({"kind: unknown '" + kind + "'"});
      return cmd_gen(flags, kind);
    }
    if (*norms) return cmd_norms(flags, input);
    if (*dec) return cmd_decompose(flags, input, dyadic);
    if (*embed) return cmd_embed(flags);
    if (*report) return cmd_report(flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& field : e.fields()) std::cerr << "  " << field << "\n";
    return kExitConfig;
  } catch (const ResolutionExceeded& e) {
    std::cerr << e.what() << " (required m = " << e.required_m() << ")\n";
    return kExitResource;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return e.code() == Errc::IOError ? kExitConfig : kExitFail;
  }
  return kExitFail;
}
