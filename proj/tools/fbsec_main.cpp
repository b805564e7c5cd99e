// fbsec: compile, inspect, run and benchmark secure-link FB applications.
//
// Exit codes: 0 ok, 1 usage error, 2 parse/validation failure, 3 runtime fault.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "fbsec/bench.hpp"
#include "fbsec/casestudy.hpp"
#include "fbsec/compiler.hpp"
#include "fbsec/parser.hpp"
#include "fbsec/services.hpp"
#include "fbsec/sim.hpp"
#include "fbsec/udp.hpp"

namespace fs = std::filesystem;
using namespace fbsec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitRuntime = 3;

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    out << content;
    return bool(out);
}

void print_diags(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) std::cerr << format_diagnostic(d) << "\n";
}

std::optional<Application> load_app(const std::string& path, int& exit_code) {
    auto text = read_file(path);
    if (!text) {
        std::cerr << "error: cannot read '" << path << "'\n";
        exit_code = kExitUsage;
        return std::nullopt;
    }
    auto parsed = fbs::parse_application(*text, path);
    print_diags(parsed.diags);
    if (!parsed.app) {
        exit_code = kExitParse;
        return std::nullopt;
    }
    auto diags = validate_application(*parsed.app);
    print_diags(diags);
    if (has_errors(diags)) {
        exit_code = kExitParse;
        return std::nullopt;
    }
    return parsed.app;
}

int cmd_compile(const std::string& app_path, const std::string& out_dir, int base_port,
                const std::string& base_group, bool plain) {
    int exit_code = kExitOk;
    auto app = load_app(app_path, exit_code);
    if (!app) return exit_code;

    cl::CompileOptions opts;
    opts.base = {base_group, static_cast<std::uint16_t>(base_port)};
    opts.with_encryption = !plain;
    auto result = cl::compile_secure_links(*app, opts);
    print_diags(result.diags);
    if (!result.plan) return kExitParse;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        std::cerr << "error: cannot create output directory '" << out_dir << "'\n";
        return kExitUsage;
    }

    auto docs = cl::emit_plan(*result.plan);
    for (const auto& [device, doc] : docs) {
        const std::string path = (fs::path(out_dir) / (device + ".fbs")).string();
        if (!write_file(path, doc)) {
            std::cerr << "error: cannot write '" << path << "'\n";
            return kExitRuntime;
        }
        std::cout << "wrote " << path << "\n";
    }
    const std::string manifest_path = (fs::path(out_dir) / "channels.manifest").string();
    if (!write_file(manifest_path, cl::emit_manifest(*result.plan, opts.base))) {
        std::cerr << "error: cannot write '" << manifest_path << "'\n";
        return kExitRuntime;
    }
    std::cout << "wrote " << manifest_path << "\n";
    return kExitOk;
}

int cmd_inspect(const std::string& app_path, int base_port, const std::string& base_group) {
    int exit_code = kExitOk;
    auto app = load_app(app_path, exit_code);
    if (!app) return exit_code;

    std::cout << "devices: " << app->devices.size() << "\n";
    for (const auto& dev : app->devices) {
        std::cout << "  " << dev << ":";
        for (const auto& [inst, type] : app->root.instances)
            if (app->mapping.at(inst) == dev) std::cout << " " << inst << "(" << type << ")";
        std::cout << "\n";
    }
    std::cout << "event connections: " << app->root.event_conns.size() << "\n";
    std::cout << "data connections: " << app->root.data_conns.size() << "\n";
    std::cout << "secure links: " << app->secure_links.size() << "\n";
    for (std::size_t i = 0; i < app->secure_links.size(); ++i) {
        const auto& sl = app->secure_links[i];
        std::cout << "  [" << i + 1 << "] " << sl.d_con.from.str() << " -> " << sl.d_con.to.str()
                  << " goal=" << goal_name(sl.goal) << " alg=" << sl.alg;
        for (const auto& [k, v] : sl.params) std::cout << " " << k << "=" << value_to_text(v);
        std::cout << "\n";
    }

    cl::CompileOptions opts;
    opts.base = {base_group, static_cast<std::uint16_t>(base_port)};
    auto result = cl::compile_secure_links(*app, opts);
    if (result.plan && !result.plan->links.empty()) {
        std::cout << "channel table (base " << opts.base.str() << "):\n";
        for (const auto& link : result.plan->links) {
            std::cout << "  link " << link.link_id << " data=" << link.channels.data.str()
                      << " ke=" << link.channels.ke.str() << " ts=" << link.channels.ts.str()
                      << " " << link.source_device << " -> " << link.target_device << " via "
                      << link.sender_instance << "/" << link.recv_instance << "\n";
        }
    }
    return kExitOk;
}

int cmd_run(const std::string& plan_dir, const std::string& device, const std::string& mode,
            std::uint64_t duration_ms) {
    const std::string path = (fs::path(plan_dir) / (device + ".fbs")).string();
    int exit_code = kExitOk;
    auto app = load_app(path, exit_code);
    if (!app) return exit_code;

    rt::ServiceRegistry services = rt::standard_services({});
    crypto::SystemEntropy rng;

    try {
        if (mode == "virtual") {
            auto clock = std::make_shared<VirtualClock>();
            net::LoopbackNetwork fabric(clock);
            rt::DeviceRuntime runtime(device, app->root, app->fb_types, services,
                                      rt::standard_algorithms(), clock, &fabric, &rng);
            rt::SimDriver driver(clock, &fabric);
            driver.add(&runtime);
            driver.boot();
            driver.run_until(duration_ms);
            std::cout << "virtual run of " << device << " for " << duration_ms << "ms: "
                      << runtime.events_processed() << " events processed\n";
            print_diags(runtime.diagnostics());
            return has_errors(runtime.diagnostics()) ? kExitRuntime : kExitOk;
        }
        if (!net::UdpTransport::available()) {
            std::cerr << "error: multicast sockets unavailable on this host\n";
            return kExitRuntime;
        }
        auto clock = std::make_shared<RealClock>();
        net::UdpTransport transport;
        rt::DeviceRuntime runtime(device, app->root, app->fb_types, services,
                                  rt::standard_algorithms(), clock, &transport, &rng);
        runtime.boot_init();
        runtime.run_until_idle(100000);
        runtime.boot_start();
        rt::run_realtime(runtime, duration_ms);
        std::cout << "real run of " << device << " for " << duration_ms << "ms: "
                  << runtime.events_processed() << " events processed\n";
        print_diags(runtime.diagnostics());
        return has_errors(runtime.diagnostics()) ? kExitRuntime : kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "runtime fault: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_bench(const std::string& app_path, std::size_t cycles, unsigned keysize,
              const std::string& topology, double latency_ms, std::uint64_t seed,
              const std::string& format, int base_port, const std::string& base_group) {
    int exit_code = kExitOk;
    auto app = load_app(app_path, exit_code);
    if (!app) return exit_code;

    bench::BenchOptions opts;
    opts.cycles = cycles;
    opts.keysize_override = keysize;
    opts.topology = topology == "single" ? bench::Topology::Single : bench::Topology::Distributed;
    opts.latency_ms = latency_ms;
    opts.seed = seed;
    opts.base = {base_group, static_cast<std::uint16_t>(base_port)};

    try {
        auto enc = bench::run_latency_bench(*app, opts);
        if (format == "csv") {
            std::cout << bench::format_csv(enc);
            return kExitOk;
        }
        bench::BenchOptions plain = opts;
        plain.with_encryption = false;
        plain.keysize_override.reset();
        auto ref = bench::run_latency_bench(*app, plain);
        std::cout << bench::format_table({ref, enc});
        return kExitOk;
    } catch (const bench::BenchError& e) {
        std::cerr << "bench error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Secure-link function block compiler and latency bench"};
    cli.require_subcommand(1);
    cli.footer("Exit codes: 0 ok, 1 usage error, 2 parse/validation failure, 3 runtime fault");

    std::string app_path, out_dir = "out", device, mode = "virtual", topology, format = "table";
    std::string base_group = "239.0.0.1", out_file;
    int base_port = 61000;
    std::size_t cycles = 100;
    unsigned keysize = 128;
    double latency_ms = 0.0;
    std::uint64_t seed = 1, duration_ms = 5000;
    bool plain = false;

    auto* compile = cli.add_subcommand("compile", "Lower secure links into per-device networks");
    compile->add_option("app", app_path, "application .fbs file")->required();
    compile->add_option("--out", out_dir, "output directory")->capture_default_str();
    compile->add_option("--base-port", base_port, "base channel port")
        ->check(CLI::Range(1024, 65535))
        ->capture_default_str();
    compile->add_option("--base-group", base_group, "multicast group")->capture_default_str();
    compile->add_flag("--plain", plain, "emit the no-encryption reference pipeline");

    auto* inspect = cli.add_subcommand("inspect", "Print network, secure links and channel table");
    inspect->add_option("app", app_path, "application .fbs file")->required();
    inspect->add_option("--base-port", base_port, "base channel port")
        ->check(CLI::Range(1024, 65535))
        ->capture_default_str();
    inspect->add_option("--base-group", base_group, "multicast group")->capture_default_str();

    auto* run = cli.add_subcommand("run", "Execute one device network from a compiled plan");
    run->add_option("plan_dir", app_path, "directory produced by compile")->required();
    run->add_option("--device", device, "device name")->required();
    run->add_option("--mode", mode, "real|virtual")
        ->check(CLI::IsMember({"real", "virtual"}))
        ->capture_default_str();
    run->add_option("--duration-ms", duration_ms, "how long to run")->capture_default_str();

    auto* bench_cmd = cli.add_subcommand("bench", "Measure end-to-end trip latency");
    bench_cmd->add_option("app", app_path, "application .fbs file")->required();
    bench_cmd->add_option("--cycles", cycles, "scan cycles (>= 100)")->capture_default_str();
    bench_cmd->add_option("--keysize", keysize, "AES key size for every link")
        ->check(CLI::IsMember({128u, 192u, 256u}))
        ->required();
    bench_cmd->add_option("--topology", topology, "single|distributed")
        ->check(CLI::IsMember({"single", "distributed"}))
        ->required();
    bench_cmd->add_option("--latency-ms", latency_ms, "one-way loopback latency")
        ->capture_default_str();
    bench_cmd->add_option("--seed", seed, "jitter/entropy seed")->capture_default_str();
    bench_cmd->add_option("--format", format, "table|csv")
        ->check(CLI::IsMember({"table", "csv"}))
        ->capture_default_str();
    bench_cmd->add_option("--base-port", base_port, "base channel port")
        ->check(CLI::Range(1024, 65535))
        ->capture_default_str();
    bench_cmd->add_option("--base-group", base_group, "multicast group")->capture_default_str();

    auto* casestudy = cli.add_subcommand("casestudy", "Write the packaged protection case study");
    casestudy->add_option("-o,--out", out_file, "output file (default: stdout)");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    if (compile->parsed()) return cmd_compile(app_path, out_dir, base_port, base_group, plain);
    if (inspect->parsed()) return cmd_inspect(app_path, base_port, base_group);
    if (run->parsed()) return cmd_run(app_path, device, mode, duration_ms);
    if (bench_cmd->parsed())
        return cmd_bench(app_path, cycles, keysize, topology, latency_ms, seed, format, base_port,
                         base_group);
    if (casestudy->parsed()) {
        const std::string doc = fbs::serialize_application(bench::build_case_study());
        if (out_file.empty()) {
            std::cout << doc;
        } else if (!write_file(out_file, doc)) {
            std::cerr << "error: cannot write '" << out_file << "'\n";
            return kExitRuntime;
        }
        return kExitOk;
    }
    return kExitUsage;
}
