// Drives the installed binary end to end; FMNET_CLI_PATH comes from CMake.
#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "helpers.hpp"

using fmnet::testing::TempDir;
using fmnet::testing::slurp;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd =
      std::string(FMNET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

const std::string kTinyGen =
    " --height 16 --width 16 --frames 8 --train-clips 3 --test-clips 2";
const std::string kTinyCfg =
    " --config '{\"frame_h\":16,\"frame_w\":16,\"extractor_channels\":[4,4],"
    "\"encoder_depth\":2}' --n 4 --retain 2";

}  // namespace

TEST_CASE("cli: exit codes separate success, runtime, and usage errors") {
  TempDir tmp("cli_codes");
  CHECK(cli("--help") == 0);
  CHECK(cli("gen --help") == 0);
  CHECK(cli("") == 2);              // subcommand required
  CHECK(cli("frobnicate") == 2);    // unknown subcommand
  CHECK(cli("gen --bogus-flag") == 2);
  CHECK(cli("gen" + kTinyGen) == 2);  // missing --out
  CHECK(cli("train --out x") == 2);   // missing --data
  CHECK(cli("eval --data " + tmp.str("nowhere") + " --out " + tmp.str("e") +
            " --checkpoint none.fmta") == 1);
  CHECK(cli("gen --out " + tmp.str("data") + " --seed 7" + kTinyGen) == 0);
  // non-empty target without --overwrite is a runtime refusal
  CHECK(cli("gen --out " + tmp.str("data") + " --seed 7" + kTinyGen) == 1);
  CHECK(cli("gen --out " + tmp.str("data") + " --seed 7 --overwrite" +
            kTinyGen) == 0);
}

TEST_CASE("cli: gen, train, eval chain produces the documented artifacts") {
  TempDir tmp("cli_chain");
  REQUIRE(cli("gen --out " + tmp.str("data") + " --seed 7" + kTinyGen) == 0);
  REQUIRE(cli("train --data " + tmp.str("data") + " --out " + tmp.str("run") +
              " --seed 3 --steps 3 --lr 0.01" + kTinyCfg) == 0);
  CHECK(fs::exists(tmp.path() / "run" / "model.fmta"));
  CHECK(fs::exists(tmp.path() / "run" / "loss.csv"));
  CHECK(fs::exists(tmp.path() / "run" / "train.log"));
  CHECK(fs::exists(tmp.path() / "run" / "run.json"));

  REQUIRE(cli("eval --data " + tmp.str("data") + " --checkpoint " +
              tmp.str("run/model.fmta") + " --out " + tmp.str("eval")) == 0);
  CHECK(fs::exists(tmp.path() / "eval" / "metrics.csv"));
  CHECK(fs::exists(tmp.path() / "eval" / "opw_pairs.csv"));
  CHECK(slurp(tmp.str("eval/metrics.csv")).find("_total") !=
        std::string::npos);

  // a wrong --n contradicts the checkpoint
  CHECK(cli("eval --data " + tmp.str("data") + " --checkpoint " +
            tmp.str("run/model.fmta") + " --out " + tmp.str("eval_bad") +
            " --n 12") == 2);

  // ground-truth passthrough needs no checkpoint and scores REL = 0
  REQUIRE(cli("eval --data " + tmp.str("data") + " --out " + tmp.str("gt") +
              " --oracle-depth") == 0);
  const std::string metrics = slurp(tmp.str("gt/metrics.csv"));
  CHECK(metrics.find("_total,0,0,0,1,1,1,") != std::string::npos);
}

TEST_CASE("cli: identical seeds reproduce every artifact byte for byte") {
  TempDir tmp("cli_det");
  REQUIRE(cli("gen --out " + tmp.str("d1") + " --seed 9" + kTinyGen) == 0);
  REQUIRE(cli("gen --out " + tmp.str("d2") + " --seed 9" + kTinyGen) == 0);
  REQUIRE(cli("gen --out " + tmp.str("d3") + " --seed 10" + kTinyGen) == 0);
  CHECK(slurp(tmp.str("d1/manifest.json")) == slurp(tmp.str("d2/manifest.json")));
  CHECK(slurp(tmp.str("d1/clips/clip_0.fmta")) ==
        slurp(tmp.str("d2/clips/clip_0.fmta")));
  CHECK(slurp(tmp.str("d1/clips/clip_0.fmta")) !=
        slurp(tmp.str("d3/clips/clip_0.fmta")));

  const std::string train_args = " --data " + tmp.str("d1") +
                                 " --seed 3 --steps 3 --lr 0.01" + kTinyCfg;
  REQUIRE(cli("train --out " + tmp.str("r1") + train_args) == 0);
  REQUIRE(cli("train --out " + tmp.str("r2") + train_args) == 0);
  CHECK(slurp(tmp.str("r1/model.fmta")) == slurp(tmp.str("r2/model.fmta")));
  CHECK(slurp(tmp.str("r1/loss.csv")) == slurp(tmp.str("r2/loss.csv")));

  const std::string eval_args = " --data " + tmp.str("d1") + " --checkpoint " +
                                tmp.str("r1/model.fmta");
  REQUIRE(cli("eval --out " + tmp.str("e1") + eval_args) == 0);
  REQUIRE(cli("eval --out " + tmp.str("e2") + eval_args) == 0);
  CHECK(slurp(tmp.str("e1/metrics.csv")) == slurp(tmp.str("e2/metrics.csv")));
  CHECK(slurp(tmp.str("e1/opw_pairs.csv")) ==
        slurp(tmp.str("e2/opw_pairs.csv")));

  // random inference masking varies across seeds but not across reruns
  REQUIRE(cli("eval --out " + tmp.str("m1") + eval_args +
              " --infer-mask random --seed 5") == 0);
  REQUIRE(cli("eval --out " + tmp.str("m1b") + eval_args +
              " --infer-mask random --seed 5") == 0);
  REQUIRE(cli("eval --out " + tmp.str("m2") + eval_args +
              " --infer-mask random --seed 6") == 0);
  CHECK(slurp(tmp.str("m1/metrics.csv")) == slurp(tmp.str("m1b/metrics.csv")));
  CHECK(slurp(tmp.str("m1/metrics.csv")) != slurp(tmp.str("m2/metrics.csv")));
}

TEST_CASE("cli: ablate emits the sweep table and plots") {
  TempDir tmp("cli_ablate");
  REQUIRE(cli("gen --out " + tmp.str("data") + " --seed 7" + kTinyGen) == 0);
  REQUIRE(cli("ablate --data " + tmp.str("data") + " --out " +
              tmp.str("abl") + " --mode sampling --seeds 1 2 --steps 2 "
              "--batch-clips 1 --lr 0.01" + kTinyCfg) == 0);
  const std::string sweep = slurp(tmp.str("abl/sweep.csv"));
  CHECK(sweep.find("sampling,random,") != std::string::npos);
  CHECK(sweep.find("sampling,uniform,") != std::string::npos);
  CHECK(sweep.find(",median,") != std::string::npos);
  CHECK(fs::exists(tmp.path() / "abl" / "rmse.svg"));
  CHECK(fs::exists(tmp.path() / "abl" / "opw.svg"));

  CHECK(cli("ablate --data " + tmp.str("data") + " --out " + tmp.str("x") +
            " --mode nonsense") == 2);
}
