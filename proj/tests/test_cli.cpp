#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "graphcache/common.hpp"
#include "graphcache/corpus.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = GC_CLI_PATH;

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "graphcache_cli_tests";
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int exit_code;
  std::string out;
};

// Runs the tool, capturing stdout+stderr.
RunResult run_cli(const std::string& args) {
  auto capture = work_dir() / "capture.txt";
  std::string cmd = std::string(kCli) + " " + args + " > " + capture.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream in(capture);
  std::ostringstream body;
  body << in.rdbuf();
  r.out = body.str();
  return r;
}

std::string tiny_synth_args(const fs::path& dir, int seed) {
  return "synth --out " + dir.string() + " --seed " + std::to_string(seed) +
         " --n-train 80 --n-dev 20 --n-test 20 --true-topics 2 --type-labels 2"
         " --relations 2 --context-len 5";
}

std::string tiny_train_flags() {
  return " --topics 2 --top-p 1 --d 6 --d-e 4 --d-h 8 --batch-size 8"
         " --epochs 2 --lr 0.3 --lda-iters 20 --seed 5";
}

}  // namespace

TEST_CASE("help exits zero") {
  RunResult r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("synth") != std::string::npos);
  CHECK(run_cli("train --help").exit_code == 0);
}

TEST_CASE("unknown subcommand is a usage error") {
  RunResult r = run_cli("frobnicate");
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("synth writes loadable, seed-reproducible splits") {
  auto dir_a = work_dir() / "synth_a";
  auto dir_b = work_dir() / "synth_b";
  REQUIRE(run_cli(tiny_synth_args(dir_a, 9)).exit_code == 0);
  REQUIRE(run_cli(tiny_synth_args(dir_b, 9)).exit_code == 0);

  graphcache::Dataset train = graphcache::load_jsonl((dir_a / "train.jsonl").string());
  CHECK(train.size() == 80);
  CHECK(train.has_types);
  CHECK(fs::exists(dir_a / "manifest.json"));

  for (const char* name : {"train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json"})
    CHECK(graphcache::hash_file((dir_a / name).string()) ==
          graphcache::hash_file((dir_b / name).string()));

  auto dir_c = work_dir() / "synth_c";
  REQUIRE(run_cli(tiny_synth_args(dir_c, 10)).exit_code == 0);
  CHECK(graphcache::hash_file((dir_a / "train.jsonl").string()) !=
        graphcache::hash_file((dir_c / "train.jsonl").string()));
}

TEST_CASE("topics fit and show") {
  auto dir = work_dir() / "topics";
  REQUIRE(run_cli(tiny_synth_args(dir, 3)).exit_code == 0);
  auto model = dir / "model.lda";
  RunResult fit = run_cli("topics fit --data " + (dir / "train.jsonl").string() +
                          " --out " + model.string() +
                          " --topics 2 --iters 30 --seed 1");
  REQUIRE(fit.exit_code == 0);
  CHECK(fs::exists(model));

  RunResult show = run_cli("topics show --model " + model.string() + " --data " +
                           (dir / "train.jsonl").string() + " --top-n 5");
  CHECK(show.exit_code == 0);
  CHECK(show.out.find("topic 0:") != std::string::npos);
  CHECK(show.out.find("topic 1:") != std::string::npos);
}

TEST_CASE("train, eval, and the unseen filter") {
  auto dir = work_dir() / "train_eval";
  REQUIRE(run_cli(tiny_synth_args(dir, 4)).exit_code == 0);
  auto model_dir = dir / "model";

  RunResult tr = run_cli("train --train " + (dir / "train.jsonl").string() +
                         " --dev " + (dir / "dev.jsonl").string() + " --test " +
                         (dir / "test.jsonl").string() + " --out " +
                         model_dir.string() + tiny_train_flags());
  REQUIRE(tr.exit_code == 0);
  CHECK(tr.out.find("epoch 1") != std::string::npos);
  CHECK(tr.out.find("test:") != std::string::npos);
  CHECK(fs::exists(model_dir / "checkpoint.bin"));
  CHECK(fs::exists(model_dir / "topics.lda"));
  CHECK(fs::exists(model_dir / "manifest.json"));

  RunResult ev = run_cli("eval --model " + model_dir.string() + " --data " +
                         (dir / "test.jsonl").string());
  CHECK(ev.exit_code == 0);
  CHECK(ev.out.find("precision") != std::string::npos);

  RunResult filtered = run_cli("eval --model " + model_dir.string() + " --data " +
                               (dir / "test.jsonl").string() + " --unseen-filter " +
                               (dir / "train.jsonl").string());
  CHECK(filtered.exit_code == 0);
  CHECK(filtered.out.find("unseen filter kept") != std::string::npos);
}

TEST_CASE("train determinism across identical invocations") {
  auto dir = work_dir() / "det";
  REQUIRE(run_cli(tiny_synth_args(dir, 6)).exit_code == 0);
  for (const char* sub : {"m1", "m2"}) {
    RunResult tr = run_cli("train --train " + (dir / "train.jsonl").string() +
                           " --dev " + (dir / "dev.jsonl").string() + " --test " +
                           (dir / "test.jsonl").string() + " --out " +
                           (dir / sub).string() + tiny_train_flags());
    REQUIRE(tr.exit_code == 0);
  }
  for (const char* name : {"checkpoint.bin", "topics.lda", "manifest.json"})
    CHECK(graphcache::hash_file((dir / "m1" / name).string()) ==
          graphcache::hash_file((dir / "m2" / name).string()));
}

TEST_CASE("eval with a mismatched label set is a data error") {
  auto dir = work_dir() / "mismatch";
  REQUIRE(run_cli(tiny_synth_args(dir, 7)).exit_code == 0);
  auto model_dir = dir / "model";
  REQUIRE(run_cli("train --train " + (dir / "train.jsonl").string() + " --dev " +
                  (dir / "dev.jsonl").string() + " --test " +
                  (dir / "test.jsonl").string() + " --out " + model_dir.string() +
                  tiny_train_flags())
              .exit_code == 0);

  // corrupt one gold label
  graphcache::Dataset test = graphcache::load_jsonl((dir / "test.jsonl").string());
  test.instances[0].relation = "label_from_another_dataset";
  graphcache::save_jsonl(test, (dir / "bad_test.jsonl").string());

  RunResult ev = run_cli("eval --model " + model_dir.string() + " --data " +
                         (dir / "bad_test.jsonl").string());
  CHECK(ev.exit_code == 2);
  CHECK(ev.out.find("error:") != std::string::npos);
}

TEST_CASE("missing data file is a data error") {
  RunResult r = run_cli("topics fit --data /nonexistent.jsonl --out /tmp/x.lda");
  CHECK(r.exit_code == 2);
  CHECK(r.out.find("error:") != std::string::npos);
}

TEST_CASE("config file fills defaults but flags win") {
  auto dir = work_dir() / "config";
  REQUIRE(run_cli(tiny_synth_args(dir, 8)).exit_code == 0);

  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "topics=2\ntop-p=1\nd=6\nd-e=4\nd-h=8\nbatch-size=8\n"
           "epochs=2\nlr=0.3\nlda-iters=20\nseed=5\n";
  }
  auto model_dir = dir / "model";
  RunResult tr = run_cli("train --train " + (dir / "train.jsonl").string() +
                         " --dev " + (dir / "dev.jsonl").string() + " --test " +
                         (dir / "test.jsonl").string() + " --out " +
                         model_dir.string() + " --config " +
                         (dir / "run.cfg").string() + " --epochs 1");
  REQUIRE(tr.exit_code == 0);

  std::ifstream man(model_dir / "manifest.json");
  std::ostringstream body;
  body << man.rdbuf();
  // flag overrides the file; file fills the rest
  CHECK(body.str().find("\"epochs\": 1") != std::string::npos);
  CHECK(body.str().find("\"K\": 2") != std::string::npos);

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "not-a-real-key=1\n";
  }
  RunResult bad = run_cli("train --train " + (dir / "train.jsonl").string() +
                          " --dev " + (dir / "dev.jsonl").string() + " --test " +
                          (dir / "test.jsonl").string() + " --config " +
                          (dir / "bad.cfg").string());
  CHECK(bad.exit_code == 1);
}

TEST_CASE("bench prints the table and writes artifacts") {
  auto out = work_dir() / "bench";
  RunResult r = run_cli("bench --sizes 50,100 --batch-size 8 --topics 4 --top-p 2"
                        " --d 4 --warmup 2 --measured-cached 5 --measured-full 3"
                        " --reps 2 --out " + out.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("cached") != std::string::npos);
  CHECK(r.out.find("full") != std::string::npos);
  CHECK(fs::exists(out / "bench.csv"));
  CHECK(fs::exists(out / "bench.json"));
}

TEST_CASE("sweep over a custom grid") {
  auto dir = work_dir() / "sweep";
  REQUIRE(run_cli(tiny_synth_args(dir, 11)).exit_code == 0);
  RunResult r = run_cli("sweep --train " + (dir / "train.jsonl").string() +
                        " --dev " + (dir / "dev.jsonl").string() + " --test " +
                        (dir / "test.jsonl").string() + " --out " +
                        (dir / "grid").string() +
                        " --ks 2,3 --ps 1 --epochs 1 --d 6 --d-e 4 --d-h 8"
                        " --batch-size 8 --lda-iters 10 --seed 5");
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(dir / "grid" / "sweep.csv"));
  CHECK(fs::exists(dir / "grid" / "K2_P1" / "manifest.json"));
  CHECK(fs::exists(dir / "grid" / "K3_P1" / "manifest.json"));

  RunResult bad = run_cli("sweep --train x --dev y --test z --out w --grid fig9");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("gradcheck passes at the documented tolerance") {
  RunResult r = run_cli("gradcheck --trials 3 --seed 100");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("max rel error") != std::string::npos);
}
