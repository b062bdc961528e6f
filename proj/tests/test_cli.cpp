// End-to-end checks of the command-line front end: each case shells out to
// the installed binary and inspects exit codes and produced files.
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string bin() { return std::string("\"") + EWI_BIN_PATH + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
  REQUIRE(out.good());
}

}  // namespace

TEST_CASE("cli usage surface") {
  CHECK(run(bin() + " --help") == 0);
  CHECK(run(bin() + " synth --help") == 0);
  CHECK(run(bin()) == 64);                     // missing subcommand
  CHECK(run(bin() + " frobnicate") == 64);     // unknown subcommand
  CHECK(run(bin() + " synth --bogus-flag x") == 64);
}

TEST_CASE("cli pipeline round trip") {
  testutil::TempDir tmp("cli-pipeline");
  const fs::path synth_dir = tmp / "synth";
  const fs::path spec = tmp / "spec.json";
  write_file(spec, R"({"m": 30, "t": 130, "k_true": 3, "n_bursts": 8, "seed": 5})");

  REQUIRE(run(bin() + " synth --spec " + spec.string() + " --out " +
              synth_dir.string()) == 0);
  REQUIRE(fs::is_directory(synth_dir / "x"));
  REQUIRE(fs::is_regular_file(synth_dir / "ohlc.tsv"));
  REQUIRE(fs::is_regular_file(synth_dir / "truth" / "meta.json"));
  REQUIRE(fs::is_regular_file(synth_dir / "manifest.json"));

  const fs::path cfg = tmp / "cfg.json";
  write_file(cfg, R"({
    "model": {"k": 3, "delta": 2},
    "partition": {"delta": 25, "m_days": 50},
    "eval": {"indicators": ["volume"], "alpha": 0.1, "h": 2}
  })");
  const std::string data_args = " --x " + (synth_dir / "x").string() +
                                " --ohlc " + (synth_dir / "ohlc.tsv").string();

  SUBCASE("backtest emits per-fold and pooled artifacts, deterministically") {
    const fs::path bt1 = tmp / "bt1";
    const fs::path bt2 = tmp / "bt2";
    const std::string cmd = bin() + " backtest --config " + cfg.string() +
                            data_args + " --seed 9 --out ";
    REQUIRE(run(cmd + bt1.string()) == 0);
    REQUIRE(run(cmd + bt2.string()) == 0);
    for (const char* f :
         {"volume/pooled.scores.tsv", "volume/pooled.labels.tsv",
          "volume/roc.tsv", "volume/pr.tsv", "volume/folds.tsv",
          "volume/metrics.txt", "volume/fold_000.scores.tsv",
          "manifest.json"}) {
      REQUIRE(fs::is_regular_file(bt1 / f));
      CHECK(slurp(bt1 / f) == slurp(bt2 / f));  // same config, same bytes
    }
    CHECK(contains(slurp(bt1 / "volume/metrics.txt"), "indicator\tvolume\n"));
  }

  SUBCASE("sweep feeds report") {
    const fs::path sweep_dir = tmp / "sweep";
    const fs::path report_dir = tmp / "report";
    const std::string env =
        "EWI_EVAL_ALPHAS='[0.05, 0.1]' EWI_EVAL_HS='[2, 4]' "
        "EWI_EVAL_KS='[3]' EWI_EVAL_DELTAS='[2]' ";
    REQUIRE(run(env + bin() + " sweep --config " + cfg.string() + data_args +
                " --out " + sweep_dir.string()) == 0);
    REQUIRE(fs::is_regular_file(sweep_dir / "sweep.tsv"));
    REQUIRE(run(bin() + " report --sweep " +
                (sweep_dir / "sweep.tsv").string() + " --out " +
                report_dir.string()) == 0);
    const std::string report = slurp(report_dir / "report.txt");
    CHECK(contains(report, "AUC PR by indicator"));
    CHECK(contains(report, "volume"));
  }

  SUBCASE("environment variables override config and flags stay strongest") {
    const fs::path dec = tmp / "dec";
    REQUIRE(run("EWI_MODEL_K=4 EWI_SOLVER_MAX_ITERS=40 " + bin() +
                " decompose --in " + (synth_dir / "x").string() + " --out " +
                dec.string()) == 0);
    CHECK(contains(slurp(dec / "metrics.txt"), "k\t4\n"));

    const fs::path dec2 = tmp / "dec2";
    REQUIRE(run("EWI_MODEL_K=4 EWI_SOLVER_MAX_ITERS=40 " + bin() +
                " decompose --k 2 --in " + (synth_dir / "x").string() +
                " --out " + dec2.string()) == 0);
    CHECK(contains(slurp(dec2 / "metrics.txt"), "k\t2\n"));
  }

  SUBCASE("seed can come from the environment") {
    const fs::path s7 = tmp / "seed7";
    REQUIRE(run("EWI_SEED=7 " + bin() + " synth --spec " + spec.string() +
                " --out " + s7.string()) == 0);
    // the spec file pins its own seed, so the generator ignores EWI_SEED,
    // but the manifest snapshot must record the override
    CHECK(contains(slurp(s7 / "manifest.json"), "\"seed\": 7"));

    const fs::path bare = tmp / "seed7_bare";
    REQUIRE(run("EWI_SEED=7 " + bin() + " synth --out " + bare.string()) == 0);
    CHECK(contains(slurp(bare / "truth" / "meta.json"), "\"seed\": 7"));
  }
}

TEST_CASE("cli failure modes leave no partial output") {
  testutil::TempDir tmp("cli-fail");

  SUBCASE("existing output directory is a config error") {
    const fs::path out = tmp / "occupied";
    fs::create_directories(out);
    CHECK(run(bin() + " synth --out " + out.string()) == 65);
  }

  SUBCASE("missing input files are data errors") {
    const fs::path out = tmp / "never";
    CHECK(run(bin() + " evaluate --scores " + (tmp / "no.tsv").string() +
              " --labels " + (tmp / "no2.tsv").string() + " --out " +
              out.string()) == 66);
    CHECK(!fs::exists(out));
    CHECK(fs::is_empty(tmp.path()));  // no stray staging directories either
  }

  SUBCASE("malformed config is a config error") {
    const fs::path cfg = tmp / "broken.json";
    write_file(cfg, "{ not json");
    const fs::path out = tmp / "never";
    CHECK(run(bin() + " synth --config " + cfg.string() + " --out " +
              out.string()) == 65);
    CHECK(!fs::exists(out));
  }

  SUBCASE("wrongly typed config keys are config errors") {
    const fs::path cfg = tmp / "typed.json";
    write_file(cfg, R"({"model": {"k": "ten"}})");
    const fs::path out = tmp / "never";
    CHECK(run(bin() + " decompose --config " + cfg.string() + " --in nowhere" +
              " --out " + out.string()) == 65);
    CHECK(!fs::exists(out));
  }
}

TEST_CASE("cli evaluate reproduces a hand-checked instance") {
  testutil::TempDir tmp("cli-eval");
  write_file(tmp / "scores.tsv", "0\t0.9\n1\t0.8\n2\t0.3\n3\t0.2\n");
  write_file(tmp / "labels.tsv", "0\t1\n1\t0\n2\t1\n3\t0\n");
  const fs::path out = tmp / "eval";
  REQUIRE(run(bin() + " evaluate --scores " + (tmp / "scores.tsv").string() +
              " --labels " + (tmp / "labels.tsv").string() + " --out " +
              out.string()) == 0);
  const std::string metrics = slurp(out / "metrics.txt");
  CHECK(contains(metrics, "auc_roc\t0.75\n"));
  CHECK(contains(metrics, "n\t4\n"));
  CHECK(contains(metrics, "epsilon\t0.5\n"));
  const std::string roc = slurp(out / "roc.tsv");
  CHECK(contains(roc, "threshold\tx\ty\n"));
}
