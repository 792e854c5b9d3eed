#include <doctest.h>

#include <filesystem>
#include <json.hpp>

#include "cblend/error.hpp"
#include "cblend/experiment.hpp"
#include "cblend/output.hpp"
#include "cblend/trainer.hpp"

using namespace cblend;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("cblend_unit_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    const auto b = read_file_bytes(p);
    return std::string(b.begin(), b.end());
}

const char* kMinimal = R"(# minimal run
[run]
seed = 1

[job.mix]
type = blend
method = textual
pair = A,B
weight = 0.5
n_samples = 20
)";

} // namespace

TEST_SUITE("config") {
TEST_CASE("ini parsing keeps sections, keys and lines") {
    const auto ini = IniFile::parse("; c\n[a]\nx = 1\n\n[b]\ny=two words\n");
    REQUIRE(ini.sections().size() == 2);
    CHECK(ini.find("b")->entries[0].value == "two words");
    CHECK(ini.find("b")->entries[0].line == 6);
    CHECK_THROWS_AS(IniFile::parse("[a]\nx=1\nx=2\n"), ConfigError);
    CHECK_THROWS_AS(IniFile::parse("[a]\n[a]\n"), ConfigError);
    CHECK_THROWS_AS(IniFile::parse("x=1\n"), ConfigError);
    CHECK_THROWS_AS(IniFile::parse("[a]\njunk\n"), ConfigError);
}

TEST_CASE("unknown keys are listed together") {
    try {
        parse_experiment_config("[run]\nsed = 1\n[sampler]\nstep = 3\n[extra]\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("sed") != std::string::npos);
        CHECK(msg.find("step") != std::string::npos);
        CHECK(msg.find("extra") != std::string::npos);
    }
}

TEST_CASE("domain defaults and job parsing") {
    const auto cfg = parse_experiment_config(
        "[domain]\nkind = glyph\n[sampler]\nn_steps = 10\n[job.a]\ntype = blend\nmethod = alternate\npair = circle,square\n"
        "ratio = 3\n");
    CHECK(cfg.domain == "glyph");
    CHECK(cfg.sampler.guidance_scale == 7.5);
    CHECK(cfg.dims.hidden == default_hidden("glyph"));
    REQUIRE(cfg.jobs.size() == 1);
    CHECK(cfg.jobs[0].spec.pattern.size() == 10);
    CHECK(cfg.jobs[0].outputs == std::vector<std::string>{"csv", "ppm"});
    CHECK_THROWS_AS(parse_experiment_config("[job.a]\nmethod = textual\n"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config("[job.a]\ntype = sweep\nmethod = switch\npair = A,B\n"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config("[job.a]\ntype = blend\nmethod = alternate\npair = A,B\npattern = 12\n"),
                    ConfigError);
}

TEST_CASE("grid and pattern syntax") {
    CHECK(parse_grid("0:3") == std::vector<double>{0, 1, 2, 3});
    CHECK(parse_grid("0:1:0.5") == std::vector<double>{0, 0.5, 1});
    CHECK(parse_grid("0.2, 0.7") == std::vector<double>{0.2, 0.7});
    CHECK(parse_pattern("1,2,2") == std::vector<bool>{true, false, false});
    CHECK(parse_pattern("121") == std::vector<bool>{true, false, true});
    CHECK_THROWS_AS(parse_pattern("13"), ConfigError);
    CHECK_THROWS_AS(split_list("a,,b"), ConfigError);
}
}

TEST_SUITE("experiment") {
TEST_CASE("minimal config writes a manifest, one csv and one svg") {
    const auto out = fresh_dir("minimal");
    const auto cfg = parse_experiment_config(kMinimal);
    const auto m = run_experiment(cfg, kMinimal, out);
    REQUIRE(m.jobs.size() == 1);
    CHECK(m.jobs[0].outputs.size() == 2);
    std::size_t csv = 0, svg = 0, files = 0;
    for (const auto& e : fs::recursive_directory_iterator(out)) {
        if (!e.is_regular_file()) continue;
        ++files;
        csv += e.path().extension() == ".csv";
        svg += e.path().extension() == ".svg";
    }
    CHECK(files == 3);
    CHECK(csv == 1);
    CHECK(svg == 1);
    const auto j = nlohmann::json::parse(slurp(out / "manifest.json"));
    CHECK(j["config_sha256"] == sha256_hex(std::string_view(kMinimal)));
    CHECK(j["checkpoint"] == "oracle");
    CHECK(j["jobs"][0]["schedule"]["method"] == "textual");
    fs::remove_all(out);
}

TEST_CASE("rerunning gives identical digests and bytes") {
    const auto a = fresh_dir("rerun_a");
    const auto b = fresh_dir("rerun_b");
    const auto cfg = parse_experiment_config(kMinimal);
    run_experiment(cfg, kMinimal, a);
    run_experiment(cfg, kMinimal, b);
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("all four methods produce a comparison table") {
    const std::string text = R"([run]
seeds = 0,1
[job.textual]
type = blend
method = textual
pair = A,B
n_samples = 30
[job.switch]
type = blend
method = switch
pair = A,B
switch_step = 12
n_samples = 30
[job.alternate]
type = blend
method = alternate
pair = A,B
n_samples = 30
[job.unet]
type = blend
method = unet
pair = A,B
variant = enc1_dec2
n_samples = 30
)";
    const auto out = fresh_dir("four");
    const auto m = run_experiment(parse_experiment_config(text), text, out);
    REQUIRE(m.comparison.has_value());
    const auto table = parse_csv(slurp(out / "comparison.csv"));
    CHECK(table.rows.size() == 4);
    CHECK(table.header.front() == "job");
    CHECK(table.rows[1][0] == "switch");
    CHECK(table.rows[1][8] == "60");
    fs::remove_all(out);
}

TEST_CASE("train then sample uses the fresh checkpoint") {
    const std::string text = R"([run]
seed = 2
[model]
hidden = 8
embed = 4
time = 4
[train]
epochs = 1
steps_per_epoch = 2
batch_size = 4
[job.fit]
type = train
[job.draw]
type = sample
concepts = A
n_samples = 3
)";
    const auto out = fresh_dir("train");
    const auto m = run_experiment(parse_experiment_config(text), text, out);
    CHECK(m.checkpoint == sha256_hex(read_file_bytes(out / "fit" / "model.ckpt")));
    CHECK(fs::exists(out / "fit" / "loss_curve.csv"));
    CHECK(fs::exists(out / "draw" / "samples.csv"));
    fs::remove_all(out);
}

TEST_CASE("glyph jobs without a model are configuration errors") {
    const std::string text = "[domain]\nkind = glyph\n[job.x]\ntype = sample\n";
    const auto out = fresh_dir("glyph_missing");
    CHECK_THROWS_AS(run_experiment(parse_experiment_config(text), text, out), ConfigError);
    fs::remove_all(out);
}

TEST_CASE("rank jobs write rankings and the table") {
    const std::string text = std::string("[job.ranks]\ntype = rank\nballots = ") + CBLEND_FIXTURE_DIR +
                             "/ballots_partial.csv\ncategory = Synthetic\npair = A,B\n";
    const auto out = fresh_dir("rank");
    run_experiment(parse_experiment_config(text), text, out);
    const auto t = parse_csv(slurp(out / "ranks" / "table.csv"));
    CHECK(t.rows.at(0).at(1) == "A-B");
    CHECK(t.rows.at(0).at(9) == "4");
    fs::remove_all(out);
}
}
