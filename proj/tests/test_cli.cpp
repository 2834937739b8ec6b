// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kConfig = std::string(BFWLOC_SOURCE_DIR) + "/configs/default.json";

// Small enough to run in a few seconds.
const std::string kQuick = " --set scenario.channel.subcarriers=4 --set scenario.walk.points_per_area=8"
                           " --set forest.n_trees=10";

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(BFWLOC_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("bfwloc_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<std::string> lines(const fs::path& file)
{
    std::istringstream in(testing::read_text(file.string()));
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

// Data rows: everything after the comment line and the column header.
std::size_t data_rows(const fs::path& file)
{
    const auto l = lines(file);
    return l.size() >= 2 ? l.size() - 2 : 0;
}

} // namespace

TEST_CASE("optimize writes the full ranking with provenance header")
{
    const fs::path out = scratch("optimize");
    REQUIRE(run_cli("optimize -c " + kConfig + " --max-order 0 --out " + out.string()) == 0);
    const auto l = lines(out / "ranking.csv");
    REQUIRE(l.size() == 497);
    CHECK(l[0].rfind("# bfwloc 1.0.0 config=", 0) == 0);
    CHECK(l[0].find("seed=1") != std::string::npos);
    CHECK(l[1] == "rank,b,ids,s1,s2,s,feasible");
}

TEST_CASE("optimize with every candidate selected has one row")
{
    const fs::path out = scratch("optimize_all");
    REQUIRE(run_cli("optimize -c " + kConfig + " --set placement.selected=12 --out " + out.string()) == 0);
    CHECK(data_rows(out / "ranking.csv") == 1);
}

TEST_CASE("reflections change the top pattern")
{
    const fs::path a = scratch("xi0");
    const fs::path b = scratch("xi1");
    REQUIRE(run_cli("optimize -c " + kConfig + " --max-order 0 --out " + a.string()) == 0);
    REQUIRE(run_cli("optimize -c " + kConfig + " --max-order 1 --out " + b.string()) == 0);
    CHECK(lines(a / "ranking.csv")[2] != lines(b / "ranking.csv")[2]);
}

TEST_CASE("configuration errors exit with 2")
{
    const fs::path out = scratch("errors");
    CHECK(run_cli("optimize -c /nonexistent/config.json --out " + out.string()) == 2);
    CHECK(run_cli("optimize -c " + kConfig + " --set placement.selected=13 --out " + out.string()) == 2);
    CHECK(run_cli("run -c " + kConfig + " --window 0 --out " + out.string()) == 2);
    CHECK(run_cli("run -c " + kConfig + " --ids 1-2-99 --out " + out.string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("optimize -c " + kConfig + " --set placement.mode=sideways --out " + out.string()) == 2);
}

TEST_CASE("run writes a model and reports, and eval re-scores the model")
{
    const fs::path out = scratch("run");
    REQUIRE(run_cli("run -c " + kConfig + kQuick + " --ids 1-5-8-12 --out " + out.string()) == 0);
    for (const char* f : {"model.json", "report.csv", "cdf.csv", "confusion.csv", "errors.csv", "error_stats.csv"})
        CHECK(fs::exists(out / f));
    const auto report = lines(out / "report.csv");
    double pe = -1.0;
    for (const auto& l : report)
        if (l.rfind("Pe,", 0) == 0)
            pe = std::stod(l.substr(3));
    CHECK(pe >= 0.0);
    CHECK(pe <= 1.0);
    CHECK(lines(out / "cdf.csv")[1] == "epsilon,cum_prob");
    CHECK(data_rows(out / "confusion.csv") == 32);

    const fs::path again = scratch("eval");
    REQUIRE(run_cli("eval -c " + kConfig + kQuick + " --model " + (out / "model.json").string() + " --out " +
                    again.string()) == 0);
    // The config hash differs (run was given --ids); the report body must not.
    auto body = [](const fs::path& f) {
        auto l = lines(f);
        l.erase(l.begin());
        return l;
    };
    CHECK(body(again / "report.csv") == body(out / "report.csv"));
}

TEST_CASE("sweep rank selection controls the row count")
{
    const fs::path out = scratch("sweep");
    REQUIRE(run_cli("sweep -c " + kConfig + kQuick + " --ranks top:5,bottom:5 --out " + out.string()) == 0);
    CHECK(data_rows(out / "sweep.csv") == 10);
    CHECK(lines(out / "sweep.csv")[1] == "rank,b,ids,s1,s2,s,Pe,mean_err");
    CHECK(fs::exists(out / "sweep_summary.csv"));
}

TEST_CASE("same config and seed give identical files for any job count")
{
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    REQUIRE(run_cli("sweep -c " + kConfig + kQuick + " --ranks top:3 --jobs 1 --out " + a.string()) == 0);
    REQUIRE(run_cli("sweep -c " + kConfig + kQuick + " --ranks top:3 --jobs 3 --out " + b.string()) == 0);
    CHECK(testing::read_text((a / "sweep.csv").string()) == testing::read_text((b / "sweep.csv").string()));

    const fs::path c = scratch("det_c");
    REQUIRE(run_cli("sweep -c " + kConfig + kQuick + " --ranks top:3 --seed 2 --out " + c.string()) == 0);
    CHECK(testing::read_text((a / "sweep.csv").string()) != testing::read_text((c / "sweep.csv").string()));
}
