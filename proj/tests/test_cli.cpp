// End-to-end checks of the nilm binary: exit codes, file outputs, and
// config resolution. The binary path arrives via --cli <path>.
#define DOCTEST_CONFIG_IMPLEMENT
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "nilm/data.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_cli;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("nilm-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

int runCli(const std::string& args, const fs::path& log) {
    REQUIRE(!g_cli.empty());
    const std::string cmd = g_cli + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

std::size_t lineCount(const fs::path& p) {
    std::ifstream is(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) ++n;
    return n;
}

const std::string kTinyNet =
    " --l_in 64 --l_out 8 --conv_channels 4 --res_blocks 1 --res_hidden 5 --step 4";

}  // namespace

TEST_CASE("bad invocations exit with the config code") {
    TempDir tmp;
    CHECK(runCli("", tmp.path / "a.log") == 2);
    CHECK(runCli("frobnicate", tmp.path / "b.log") == 2);
    CHECK(runCli("synth --no_such_key 1 --out_dir " + (tmp.path / "x").string(),
                 tmp.path / "c.log") == 2);
    CHECK(runCli("synth", tmp.path / "d.log") == 2);  // out_dir missing
    CHECK(runCli("synth --out_dir " + (tmp.path / "x").string() + " --duration_days abc",
                 tmp.path / "e.log") == 2);
}

TEST_CASE("missing inputs exit with the data code") {
    TempDir tmp;
    CHECK(runCli("train --out_dir " + (tmp.path / "o").string() +
                     " --target /nonexistent/t.dat --aggregate /nonexistent/a.dat" + kTinyNet,
                 tmp.path / "a.log") == 3);
    CHECK(runCli("disaggregate --out_dir " + (tmp.path / "o").string() +
                     " --checkpoint /nonexistent/c.ckpt --aggregate /nonexistent/a.dat",
                 tmp.path / "b.log") == 3);
    // aggregate and channels are mutually exclusive
    CHECK(runCli("train --out_dir " + (tmp.path / "o").string() +
                     " --target /x.dat --aggregate /a.dat --channels /b.dat,/c.dat" + kTinyNet,
                 tmp.path / "c.log") == 2);
}

TEST_CASE("synth is deterministic and replayable from its resolved config") {
    TempDir tmp;
    const fs::path a = tmp.path / "a", b = tmp.path / "b", c = tmp.path / "c";
    const std::string base = " --seed 11 --duration_days 0.05";
    REQUIRE(runCli("synth --out_dir " + a.string() + base, tmp.path / "a.log") == 0);
    REQUIRE(runCli("synth --out_dir " + b.string() + base, tmp.path / "b.log") == 0);
    for (const char* name : {"fridge.dat", "lighting.dat", "dishwasher.dat", "aggregate.dat"}) {
        CHECK(slurp(a / name) == slurp(b / name));
    }

    // replay from the resolved config, overriding only the output directory
    REQUIRE(runCli("synth --config " + (a / "synth.resolved.cfg").string() + " --out_dir " +
                       c.string(),
                   tmp.path / "c.log") == 0);
    CHECK(slurp(a / "aggregate.dat") == slurp(c / "aggregate.dat"));
}

TEST_CASE("the training pipeline produces a checkpoint, history, and prediction") {
    TempDir tmp;
    const fs::path houseA = tmp.path / "houseA", houseB = tmp.path / "houseB";
    REQUIRE(runCli("synth --out_dir " + houseA.string() + " --seed 1 --duration_days 0.2",
                   tmp.path / "sa.log") == 0);
    REQUIRE(runCli("synth --out_dir " + houseB.string() + " --seed 2 --duration_days 0.1",
                   tmp.path / "sb.log") == 0);

    const fs::path trainDir = tmp.path / "train";
    const std::string trainArgs = "train --out_dir " + trainDir.string() + " --aggregate " +
                                  (houseA / "aggregate.dat").string() + " --target " +
                                  (houseA / "fridge.dat").string() + kTinyNet +
                                  " --epochs 2 --batch_size 16 --seed 3";
    REQUIRE(runCli(trainArgs, tmp.path / "t.log") == 0);
    CHECK(fs::exists(trainDir / "fridge.ckpt"));
    CHECK(fs::exists(trainDir / "train.resolved.cfg"));
    CHECK(lineCount(trainDir / "history.csv") == 3);  // header + one row per epoch
    {
        std::ifstream is(trainDir / "history.csv");
        std::string header;
        std::getline(is, header);
        CHECK(header == "epoch,train_mae,val_mae");
    }
    const std::string resolved = slurp(trainDir / "train.resolved.cfg");
    CHECK(resolved.find("epochs=2") != std::string::npos);
    CHECK(resolved.find("l_in=64") != std::string::npos);

    // the resolved config replays the run byte for byte
    const fs::path replayDir = tmp.path / "replay";
    REQUIRE(runCli("train --config " + (trainDir / "train.resolved.cfg").string() +
                       " --out_dir " + replayDir.string(),
                   tmp.path / "r.log") == 0);
    CHECK(slurp(replayDir / "fridge.ckpt") == slurp(trainDir / "fridge.ckpt"));
    CHECK(slurp(replayDir / "history.csv") == slurp(trainDir / "history.csv"));

    // disaggregate house B; row count equals the aggregate length, watts stay nonnegative
    const fs::path disDir = tmp.path / "dis";
    REQUIRE(runCli("disaggregate --out_dir " + disDir.string() + " --checkpoint " +
                       (trainDir / "fridge.ckpt").string() + " --aggregate " +
                       (houseB / "aggregate.dat").string() + " --step 4",
                   tmp.path / "d.log") == 0);
    const nilm::SeriesChannel pred = nilm::readSeriesCsv(disDir / "pred.csv");
    const nilm::SeriesChannel agg = nilm::loadChannel(houseB / "aggregate.dat");
    CHECK(pred.size() == agg.size());
    for (double w : pred.watts) REQUIRE(w >= 0.0);

    // divisors come from the checkpoint: an appliance_divisor flag changes nothing
    const fs::path disDir2 = tmp.path / "dis2";
    REQUIRE(runCli("disaggregate --out_dir " + disDir2.string() + " --checkpoint " +
                       (trainDir / "fridge.ckpt").string() + " --aggregate " +
                       (houseB / "aggregate.dat").string() + " --step 4 --appliance_divisor 7",
                   tmp.path / "d2.log") == 0);
    CHECK(slurp(disDir / "pred.csv") == slurp(disDir2 / "pred.csv"));

    // appliance mismatch is a config error
    CHECK(runCli("disaggregate --out_dir " + (tmp.path / "dis3").string() + " --checkpoint " +
                     (trainDir / "fridge.ckpt").string() + " --aggregate " +
                     (houseB / "aggregate.dat").string() + " --appliance lighting --step 4",
                 tmp.path / "d3.log") == 2);

    // the training aggregate itself is refused
    CHECK(runCli("disaggregate --out_dir " + (tmp.path / "dis4").string() + " --checkpoint " +
                     (trainDir / "fridge.ckpt").string() + " --aggregate " +
                     (houseA / "aggregate.dat").string() + " --step 4",
                 tmp.path / "d4.log") == 3);

    // evaluate the prediction against the true channel
    const fs::path evalDir = tmp.path / "eval";
    REQUIRE(runCli("evaluate --out_dir " + evalDir.string() + " --pred " +
                       (disDir / "pred.csv").string() + " --truth " +
                       (houseB / "fridge.dat").string() + " --appliance fridge",
                   tmp.path / "e.log") == 0);
    CHECK(fs::exists(evalDir / "metrics.csv"));
    const std::string metrics = slurp(evalDir / "metrics.csv");
    CHECK(metrics.find("mae_watts,") != std::string::npos);
    CHECK(metrics.find("off_false_positive_wh,") != std::string::npos);
}

TEST_CASE("evaluate scores a constant offset exactly") {
    TempDir tmp;
    nilm::SeriesChannel truth;
    truth.name = "truth";
    for (int i = 0; i < 50; ++i) {
        truth.timestamps.push_back(i * 3);
        truth.watts.push_back(100.0);
    }
    nilm::SeriesChannel pred = truth;
    for (double& w : pred.watts) w += 10.0;
    nilm::writeSeriesCsv(truth, tmp.path / "truth.csv");
    nilm::writeSeriesCsv(pred, tmp.path / "pred.csv");

    const fs::path evalDir = tmp.path / "eval";
    REQUIRE(runCli("evaluate --out_dir " + evalDir.string() + " --pred " +
                       (tmp.path / "pred.csv").string() + " --truth " +
                       (tmp.path / "truth.csv").string(),
                   tmp.path / "e.log") == 0);
    CHECK(slurp(evalDir / "metrics.csv").find("mae_watts,10") != std::string::npos);

    // disjoint timestamps are a data error
    nilm::SeriesChannel far = truth;
    for (auto& t : far.timestamps) t += 100000;
    nilm::writeSeriesCsv(far, tmp.path / "far.csv");
    CHECK(runCli("evaluate --out_dir " + (tmp.path / "eval2").string() + " --pred " +
                     (tmp.path / "pred.csv").string() + " --truth " +
                     (tmp.path / "far.csv").string(),
                 tmp.path / "e2.log") == 3);
}

TEST_CASE("training can synthesize its aggregate from channel files") {
    TempDir tmp;
    const fs::path house = tmp.path / "house";
    REQUIRE(runCli("synth --out_dir " + house.string() + " --seed 4 --duration_days 0.1",
                   tmp.path / "s.log") == 0);

    const std::string channels = (house / "fridge.dat").string() + "," +
                                 (house / "lighting.dat").string() + "," +
                                 (house / "dishwasher.dat").string();
    const fs::path dir = tmp.path / "train";
    REQUIRE(runCli("train --out_dir " + dir.string() + " --channels " + channels + " --target " +
                       (house / "fridge.dat").string() + kTinyNet +
                       " --epochs 1 --batch_size 16 --seed 5",
                   tmp.path / "t.log") == 0);
    CHECK(fs::exists(dir / "fridge.ckpt"));
}

TEST_CASE("training with rebalancing thins the off-state pool") {
    TempDir tmp;
    // a sparse target: two 700 W pulses in an otherwise idle trace
    nilm::SeriesChannel target;
    target.name = "pulses";
    for (int i = 0; i < 2000; ++i) {
        target.timestamps.push_back(i * 3);
        const bool on = (i >= 300 && i < 330) || (i >= 1400 && i < 1430);
        target.watts.push_back(on ? 700.0 : 0.0);
    }
    nilm::SeriesChannel aggregate = target;
    aggregate.name = "aggregate";
    for (double& w : aggregate.watts) w += 120.0;
    nilm::saveChannel(target, tmp.path / "pulses.dat");
    nilm::saveChannel(aggregate, tmp.path / "aggregate.dat");

    const fs::path dir = tmp.path / "train";
    const int rc = runCli("train --out_dir " + dir.string() + " --aggregate " +
                              (tmp.path / "aggregate.dat").string() + " --target " +
                              (tmp.path / "pulses.dat").string() +
                              " --appliance dishwasher --rebalance_target 0.1" + kTinyNet +
                              " --epochs 1 --batch_size 16 --seed 2",
                          tmp.path / "t.log");
    CHECK(rc == 0);
    const std::string log = slurp(tmp.path / "t.log");
    CHECK(log.find("after rebalancing:") != std::string::npos);
    CHECK(fs::exists(dir / "dishwasher.ckpt"));
}

TEST_CASE("gradcheck passes on its reduced default configuration") {
    TempDir tmp;
    const fs::path dir = tmp.path / "gc";
    CHECK(runCli("gradcheck --out_dir " + dir.string(), tmp.path / "g.log") == 0);
    CHECK(fs::exists(dir / "gradcheck_report.txt"));
    const std::string report = slurp(dir / "gradcheck_report.txt");
    CHECK(report.find("max_rel_error") != std::string::npos);
    CHECK(report.find("dense1.weight") != std::string::npos);  // one row per tensor

    // a step size crossing the loss kinks has to fail with the check code
    CHECK(runCli("gradcheck --out_dir " + (tmp.path / "gc2").string() + " --h 0.1",
                 tmp.path / "g2.log") == 4);
}

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--cli") g_cli = argv[i + 1];
    }
    if (g_cli.empty()) {
        const char* env = std::getenv("NILM_CLI");
        if (env) g_cli = env;
    }
    doctest::Context ctx;
    ctx.applyCommandLine(argc, argv);
    return ctx.run();
}
