#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <echodeconv/io.hpp>

using namespace echodeconv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("echodeconv_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

auto message_of(const std::function<void()>& f) -> std::string {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("signal text parsing") {
    const auto f = io::parse_signal_text("# description = three echoes\n# sample_rate_hz=5e7\n\n1.5\n -2 \n3e-3\n");
    CHECK(f.signal.samples == Signal{1.5, -2.0, 3e-3});
    REQUIRE(f.signal.sample_rate_hz);
    CHECK(*f.signal.sample_rate_hz == 5e7);
    CHECK(f.metadata.at("description") == "three echoes");

    const auto bad = message_of([] { io::parse_signal_text("1.0\n2.0\n# note\nabc\n", "trace.txt"); });
    CHECK(bad.find("trace.txt:4") != std::string::npos);
    CHECK(bad.find("abc") != std::string::npos);
    CHECK_THROWS_AS(io::parse_signal_text("1.0\nnan\n"), ParseError);
    CHECK_THROWS_AS(io::parse_signal_text("1.0 2.0\n"), ParseError);
    CHECK_THROWS_AS(io::parse_signal_text("# only comments\n"), ParseError);
    CHECK_THROWS_AS(io::parse_signal_text("# sample_rate_hz=-1\n1\n"), ParseError);
}

TEST_CASE("signal files round trip exactly") {
    TempDir dir;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Signal s(300);
    for (auto& v : s) v = g(rng) * 1e-3;
    s[0] = std::numeric_limits<double>::denorm_min();
    s[1] = -0.0;
    const auto path = dir.path / "s.txt";
    io::write_signal_file(path, s, "noise", 5e7);
    const auto back = io::read_signal_file(path);
    CHECK(back.signal.samples == s);
    CHECK(*back.signal.sample_rate_hz == 5e7);
    CHECK(back.metadata.at("description") == "noise");
    CHECK(io::format_signal(s) == io::format_signal(back.signal.samples));
}

TEST_CASE("format_double and parse_double") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -123456.789, 2006.0}) CHECK(io::parse_double(io::format_double(v), "v") == v);
    CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::isinf(io::parse_double("inf", "v")));
    CHECK_THROWS(io::parse_double("1.0x", "v"));
    CHECK_THROWS(io::parse_unsigned("-3", "n"));
    CHECK(io::parse_bool("true", "b"));
    CHECK(!io::parse_bool("0", "b"));
    CHECK_THROWS(io::parse_bool("maybe", "b"));
    CHECK(io::split_list("14, 10 ,7") == std::vector<std::string>{"14", "10", "7"});
}

TEST_CASE("run config parsing") {
    const auto cfg = io::parse_run_config(
        "# grid\n"
        "sim.rho = 0.05\n"
        "sim.seed=9\n"
        "hosa.lag=31\n"
        "hosa.lag_window=none\n"
        "wavelet.denoise=db8\n"
        "forward.tau_multiplier=0.5\n"
        "forward.q_sq=0.25\n"
        "forward.gain_alignment=index\n"
        "experiment.snr_levels=20,10\n"
        "experiment.methods=WienerQ,ForWaRD+ASE\n"
        "comparison.blind=false\n");
    CHECK(cfg.sim.rho == 0.05);
    CHECK(cfg.sim.seed == 9);
    CHECK(cfg.hosa.lag == 31);
    CHECK(cfg.hosa.window == LagWindow::none);
    CHECK(cfg.forward.denoise_wavelet.vanishing_moments == 8);
    CHECK(cfg.forward.tau_multiplier == 0.5);
    REQUIRE(cfg.forward.q_sq);
    CHECK(*cfg.forward.q_sq == 0.25);
    CHECK(cfg.forward.gain_alignment == GainAlignment::index);
    CHECK(cfg.snr_levels_db == std::vector<double>{20.0, 10.0});
    CHECK(cfg.methods == std::vector<Method>{Method::wiener_q, Method::forward_ase});
    CHECK(!cfg.comparison_blind);
    CHECK(!io::parse_run_config("forward.q_sq=auto\n").forward.q_sq);
}

TEST_CASE("run config rejects bad input") {
    const auto unknown = message_of([] { io::parse_run_config("sim.rho=0.1\nsim.rhoo=0.2\n", "grid.cfg"); });
    CHECK(unknown.find("sim.rhoo") != std::string::npos);
    CHECK(unknown.find("grid.cfg:2") != std::string::npos);
    CHECK_THROWS_AS(io::parse_run_config("sim.rho\n"), ParseError);
    CHECK_THROWS(io::parse_run_config("sim.rho=abc\n"));
    CHECK_THROWS(io::parse_run_config("sim.rho=1.5\n"));
    CHECK_THROWS(io::parse_run_config("forward.tau_multiplier=50\n"));
    CHECK_THROWS(io::parse_run_config("experiment.methods=Wiener\n"));
    CHECK_THROWS(io::parse_run_config("hosa.lag_window=hann\n"));
}

TEST_CASE("run config round trips through its own echo") {
    io::RunConfig cfg;
    cfg.sim.rho = 0.07;
    cfg.forward.q_sq = 1.5;
    cfg.trials = 12;
    cfg.methods = {Method::forward};
    const auto text = io::format_config(cfg);
    const auto back = io::parse_run_config(text);
    CHECK(io::format_config(back) == text);
    CHECK(io::config_json(back) == io::config_json(cfg));
    // every documented key is present in the echo
    const auto j = io::config_json(io::RunConfig{});
    for (const auto& k : io::config_key_names()) CHECK(j.contains(k));
}

TEST_CASE("reports carry the format version and config") {
    const auto h = io::report_header("deconvolve", io::RunConfig{});
    CHECK(h["format_version"] == io::format_version);
    CHECK(h["config"]["experiment.master_seed"] == "2006");
    CHECK(io::number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(io::number(2.5) == 2.5);
}

TEST_CASE("atomic writes leave no temporary behind") {
    TempDir dir;
    const auto p = dir.path / "out.txt";
    io::write_file_atomic(p, "first\n");
    io::write_file_atomic(p, "second\n");
    CHECK(io::read_text(p) == "second\n");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++files;
    CHECK(files == 1);
    CHECK_THROWS(io::write_file_atomic(dir.path / "missing" / "x.txt", "x"));
    CHECK_THROWS(io::read_text(dir.path / "nope.txt"));
}

TEST_CASE("csv formatting") {
    CHECK(io::format_csv({"a", "b"}, {{"1", "2"}, {"3", "4"}}) == "a,b\n1,2\n3,4\n");
}
