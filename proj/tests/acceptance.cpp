// Acceptance suite: runs every gate criterion and prints one line each.
// Exit status 0 iff all criteria hold.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "fbsec/bench.hpp"
#include "fbsec/casestudy.hpp"
#include "fbsec/compiler.hpp"
#include "fbsec/parser.hpp"
#include "fbsec/services.hpp"
#include "fbsec/sim.hpp"

using namespace fbsec;
using Clk = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << number << ": " << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
}

double seconds_since(Clk::time_point start) {
    return std::chrono::duration<double>(Clk::now() - start).count();
}

Block16 to_block(const std::string& hex) {
    Block16 b{};
    auto v = from_hex(hex);
    std::copy(v.begin(), v.end(), b.begin());
    return b;
}

// --------------------------------------------------------------------------
// 1. AES known-answer conformance, all key sizes, under one second.
// --------------------------------------------------------------------------
void criterion_1() {
    const auto start = Clk::now();
    const Block16 pt = to_block("00112233445566778899aabbccddeeff");
    struct Kat {
        const char* key;
        crypto::KeySize ks;
        const char* ct;
    };
    const Kat kats[] = {
        {"000102030405060708090a0b0c0d0e0f", crypto::KeySize::Bits128,
         "69c4e0d86a7b0430d8cdb78070b4c55a"},
        {"000102030405060708090a0b0c0d0e0f1011121314151617", crypto::KeySize::Bits192,
         "dda97ca4864cdfe06eaf70a0ec0d7191"},
        {"000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f",
         crypto::KeySize::Bits256, "8ea2b7ca516745bfeafc49904b496089"},
    };
    bool ok = true;
    for (const auto& kat : kats) {
        auto sched = crypto::aes_key_expansion(from_hex(kat.key), kat.ks);
        ok &= to_hex(crypto::aes_encrypt_block(pt, sched)) == kat.ct;
        ok &= crypto::aes_decrypt_block(to_block(kat.ct), sched) == pt;
    }
    const double secs = seconds_since(start);
    ok &= secs < 1.0;
    report(1, "AES known-answer conformance (128/192/256)", ok,
           "elapsed " + std::to_string(secs) + "s");
}

// --------------------------------------------------------------------------
// 2. decrypt(encrypt(pt)) over 10,000 random pairs per key size, < 5 s.
// --------------------------------------------------------------------------
void criterion_2() {
    const auto start = Clk::now();
    std::mt19937_64 rng(0xACCE55);
    std::size_t fails = 0;
    for (crypto::KeySize ks :
         {crypto::KeySize::Bits128, crypto::KeySize::Bits192, crypto::KeySize::Bits256}) {
        for (int i = 0; i < 10000; ++i) {
            byte_vec key(crypto::key_bytes(ks));
            for (auto& b : key) b = static_cast<std::uint8_t>(rng());
            Block16 pt;
            for (auto& b : pt) b = static_cast<std::uint8_t>(rng());
            auto sched = crypto::aes_key_expansion(key, ks);
            if (crypto::aes_decrypt_block(crypto::aes_encrypt_block(pt, sched), sched) != pt)
                ++fails;
        }
    }
    const double secs = seconds_since(start);
    report(2, "AES round-trip law, 10k random pairs per key size",
           fails == 0 && secs < 5.0,
           std::to_string(fails) + " failures, elapsed " + std::to_string(secs) + "s");
}

// --------------------------------------------------------------------------
// 3. Diffie-Hellman: toy-group oracle value, production-group symmetry.
// --------------------------------------------------------------------------
void criterion_3() {
    const auto start = Clk::now();
    bool ok = true;

    // brute-force modular exponentiation oracle on p=23, g=5
    auto brute = [](std::uint64_t base, std::uint64_t exp) {
        std::uint64_t r = 1;
        for (std::uint64_t i = 0; i < exp; ++i) r = (r * base) % 23;
        return r;
    };
    ok &= brute(5, 6) == 8;
    ok &= brute(5, 15) == 19;
    ok &= brute(19, 6) == 2 && brute(8, 15) == 2;
    const auto& toy = crypto::toy_group();
    ok &= crypto::dh_shared_secret(crypto::BigInt(6), crypto::BigInt(19), toy) == 2;
    ok &= crypto::dh_shared_secret(crypto::BigInt(15), crypto::BigInt(8), toy) == 2;

    const auto& prod = crypto::modp2048_group();
    crypto::SeededEntropy rng(31337);
    for (int i = 0; i < 100 && ok; ++i) {
        auto a = crypto::dh_keypair(prod, rng);
        auto b = crypto::dh_keypair(prod, rng);
        const auto sa = crypto::dh_shared_secret(a.private_value, b.public_value, prod);
        const auto sb = crypto::dh_shared_secret(b.private_value, a.public_value, prod);
        if (sa != sb) ok = false;
        auto ka = crypto::derive_session_key(sa, crypto::KeySize::Bits256, 1, 0);
        auto kb = crypto::derive_session_key(sb, crypto::KeySize::Bits256, 1, 0);
        if (ka.key != kb.key) ok = false;
    }
    const double secs = seconds_since(start);
    ok &= secs < 10.0;
    report(3, "Diffie-Hellman toy-group oracle + 100 production exchanges", ok,
           "elapsed " + std::to_string(secs) + "s");
}

// --------------------------------------------------------------------------
// 4. Compiler golden test on the packaged case study.
// --------------------------------------------------------------------------
void criterion_4() {
    const Application app = bench::build_case_study();
    auto r1 = cl::compile_secure_links(app);
    auto r2 = cl::compile_secure_links(app);
    bool ok = r1.plan.has_value() && r2.plan.has_value();
    std::string detail;
    if (ok) {
        const auto& plan = *r1.plan;
        std::size_t senders = 0, recvs = 0;
        for (const auto& [dev, net] : plan.device_networks)
            for (const auto& [inst, type] : net.instances) {
                if (type.rfind("CLSender", 0) == 0) ++senders;
                if (type.rfind("CLRecv", 0) == 0) ++recvs;
            }
        ok &= senders == 3 && recvs == 2;
        ok &= plan.links.size() == 3;
        ok &= plan.links[0].channels.data == plan.links[1].channels.data;  // shared 128-bit pair
        ok &= plan.links[2].channels.data != plan.links[0].channels.data;
        ok &= plan.links[0].channels.ke != plan.links[1].channels.ke;

        const auto& dp_net = plan.device_networks.at("ied_dp");
        const auto& oc_net = plan.device_networks.at("ied_oc");
        ok &= dp_net.param_bindings.at({"CLSender", "KSIZE"}) == Value{std::uint64_t{128}};
        ok &= dp_net.param_bindings.at({"CLSender", "REKEY"}) == Value{std::uint64_t{60000}};
        ok &= oc_net.param_bindings.at({"CLSender_1", "KSIZE"}) == Value{std::uint64_t{256}};

        ok &= cl::emit_plan(*r1.plan) == cl::emit_plan(*r2.plan);
        detail = std::to_string(senders) + " CLSender, " + std::to_string(recvs) + " CLRecv";
    }
    report(4, "case-study lowering: 3 senders, 2 receivers, shared channel, byte-identical", ok,
           detail);
}

// --------------------------------------------------------------------------
// 5. Semantic preservation over 50 random two-device applications.
// --------------------------------------------------------------------------
void criterion_5() {
    const auto start = Clk::now();
    std::mt19937_64 rng(0x5EED5);
    bool ok = true;
    std::string detail;

    for (int trial = 0; trial < 50 && ok; ++trial) {
        Application app;
        app.fb_types = rt::standard_library();
        app.root.add_instance("prod", "Relay");
        app.root.add_instance("cons", "Relay");
        // a little topology noise: an extra local relay chain on either side
        if (rng() % 2) {
            app.root.add_instance("noise", "Relay");
            app.mapping["noise"] = "dev_a";
        }
        app.root.event_conns.push_back({{"prod", "CNF"}, {"cons", "REQ"}});
        app.root.data_conns.push_back({{"prod", "OUT"}, {"cons", "IN"}});
        app.devices = {"dev_a", "dev_b"};
        app.mapping["prod"] = "dev_a";
        app.mapping["cons"] = "dev_b";

        SecureLink sl;
        sl.d_con = app.root.data_conns[0];
        sl.goal = SecGoal::Confidentiality;
        sl.alg = "AES";
        sl.params["keysize"] = std::uint64_t{128} + 64 * (rng() % 3);
        sl.params["rekey"] = std::uint64_t{50 + rng() % 5000};
        app.secure_links.push_back(sl);

        std::vector<bool> values;
        for (int i = 0; i < 20; ++i) values.push_back(rng() % 2 == 0);

        // oracle: the un-lowered application on a single device
        std::vector<bool> expected;
        {
            auto clock = std::make_shared<VirtualClock>();
            net::LoopbackNetwork fabric(clock);
            crypto::SeededEntropy entropy(trial);
            rt::DeviceRuntime solo("solo", app.root, app.fb_types, rt::standard_services({}),
                                   rt::standard_algorithms(), clock, &fabric, &entropy);
            rt::SimDriver driver(clock, &fabric);
            driver.add(&solo);
            driver.boot();
            for (bool v : values) {
                solo.set_input("prod", "IN", v);
                solo.inject("prod", "REQ");
                driver.run_all_idle();
                expected.push_back(std::get<bool>(solo.input_value("cons", "IN")));
            }
        }

        // lowered execution on zero-latency loopback
        std::vector<bool> actual;
        {
            auto compiled = cl::compile_secure_links(app);
            if (!compiled.plan) {
                ok = false;
                detail = "compile failed on trial " + std::to_string(trial);
                break;
            }
            auto clock = std::make_shared<VirtualClock>();
            net::LoopbackNetwork fabric(clock);
            crypto::SeededEntropy entropy(trial);
            std::map<std::string, FBType> library = rt::standard_library();
            for (const auto& [name, type] : compiled.plan->fb_types) library[name] = type;

            rt::DeviceRuntime dev_a("dev_a", compiled.plan->device_networks.at("dev_a"), library,
                                    rt::standard_services({}), rt::standard_algorithms(), clock,
                                    &fabric, &entropy);
            rt::DeviceRuntime dev_b("dev_b", compiled.plan->device_networks.at("dev_b"), library,
                                    rt::standard_services({}), rt::standard_algorithms(), clock,
                                    &fabric, &entropy);
            rt::SimDriver driver(clock, &fabric);
            driver.add(&dev_a);
            driver.add(&dev_b);
            driver.boot();
            for (bool v : values) {
                dev_a.set_input("prod", "IN", v);
                dev_a.inject("prod", "REQ");
                driver.run_all_idle();
                actual.push_back(std::get<bool>(dev_b.input_value("cons", "IN")));
            }
        }
        if (expected != actual) {
            ok = false;
            detail = "sequence mismatch on trial " + std::to_string(trial);
        }
    }
    const double secs = seconds_since(start);
    ok &= secs < 60.0;
    if (detail.empty()) detail = "50 apps, elapsed " + std::to_string(secs) + "s";
    report(5, "semantic preservation: lowered == un-lowered on 50 random apps", ok, detail);
}

// --------------------------------------------------------------------------
// 6. Rekey continuity: 50ms rekey, 500ms of 10ms traffic, two-epoch window.
// --------------------------------------------------------------------------
struct RekeyRun {
    std::set<unsigned> epochs;
    std::size_t samples = 0;
    std::uint64_t misses = 0, decode_errors = 0, drops = 0;
    std::vector<rt::LatencySample> raw;

    bool operator==(const RekeyRun&) const = default;
};

RekeyRun rekey_run() {
    Application app = bench::build_case_study();
    for (auto& sl : app.secure_links) sl.params["rekey"] = std::uint64_t{50};

    auto compiled = cl::compile_secure_links(app);
    if (!compiled.plan) throw std::runtime_error("compile failed");

    auto clock = std::make_shared<VirtualClock>();
    net::LatencyModel model;
    model.fixed_ms = 3.0;
    net::LoopbackNetwork fabric(clock, model, 4242);
    crypto::SeededEntropy entropy(4242);

    RekeyRun run;
    rt::ServiceConfig scfg;
    scfg.sample_sink = [&run](const rt::LatencySample& s) {
        run.epochs.insert(s.epoch);
        run.raw.push_back(s);
        ++run.samples;
    };
    rt::ServiceRegistry services = rt::standard_services(scfg);

    std::map<std::string, FBType> library = rt::standard_library();
    for (const auto& [name, type] : compiled.plan->fb_types) library[name] = type;
    std::vector<std::unique_ptr<rt::DeviceRuntime>> devices;
    for (const auto& dev : compiled.plan->devices)
        devices.push_back(std::make_unique<rt::DeviceRuntime>(
            dev, compiled.plan->device_networks.at(dev), library, services,
            rt::standard_algorithms(), clock, &fabric, &entropy));

    rt::SimDriver driver(clock, &fabric);
    for (auto& d : devices) driver.add(d.get());
    driver.boot();
    driver.run_until(500);
    for (auto& d : devices)
        for (const auto& [path, type] : d->instance_types())
            if (type == "E_CYCLE" && path.find('/') == std::string::npos) d->inject(path, "STOP");
    driver.run_until(520);

    for (auto& d : devices) {
        for (const auto& [path, type] : d->instance_types()) {
            auto counter = [&](const char* port) {
                return std::get<std::uint64_t>(d->output_value(path, port));
            };
            if (type == "KeyStore") run.misses += counter("MISSES");
            if (type == "ConvertFromArray") run.decode_errors += counter("ERRS");
            if (type == "Subscriber") run.decode_errors += counter("ERRS");
            if (type == "AESEncrypt") run.drops += counter("DROPS");
        }
    }
    return run;
}

void criterion_6() {
    RekeyRun a = rekey_run();
    RekeyRun b = rekey_run();
    // 50 scan cycles per link, three links
    const bool complete = a.samples == 150;
    const bool fresh = a.epochs.size() >= 9;
    const bool clean = a.misses == 0 && a.decode_errors == 0 && a.drops == 0;
    const bool deterministic = a == b;
    report(6, "rekey continuity: >=9 epochs, zero undecryptable frames, deterministic",
           complete && fresh && clean && deterministic,
           std::to_string(a.epochs.size()) + " epochs, " + std::to_string(a.samples) +
               " samples, misses=" + std::to_string(a.misses) +
               " errors=" + std::to_string(a.decode_errors) + " drops=" + std::to_string(a.drops) +
               (deterministic ? ", reproducible" : ", NON-DETERMINISTIC"));
}

// --------------------------------------------------------------------------
// 7. Measurement methodology: full table row structure and monotone cost.
// --------------------------------------------------------------------------
void criterion_7() {
    const Application app = bench::build_case_study();
    bool ok = true;
    std::vector<bench::BenchReport> reports;
    for (bench::Topology topo : {bench::Topology::Single, bench::Topology::Distributed}) {
        bench::BenchOptions base;
        base.cycles = 100;
        base.topology = topo;
        base.latency_ms = topo == bench::Topology::Distributed ? 3.0 : 0.0;

        bench::BenchOptions plain = base;
        plain.with_encryption = false;
        auto ref = bench::run_latency_bench(app, plain);
        reports.push_back(ref);

        for (unsigned ks : {128u, 192u, 256u}) {
            bench::BenchOptions enc = base;
            enc.keysize_override = ks;
            auto r = bench::run_latency_bench(app, enc);
            ok &= static_cast<double>(r.min_ms) <= r.mean_ms;
            ok &= r.mean_ms <= static_cast<double>(r.max_ms);
            ok &= r.mean_ms >= ref.mean_ms;  // encryption never cheaper
            ok &= r.samples == 300;
            reports.push_back(r);
        }
    }
    const std::string table = bench::format_table(reports);
    for (const char* needle :
         {"no encryption / single", "AES128 / single", "AES192 / single", "AES256 / single",
          "no encryption / distributed", "AES128 / distributed", "AES192 / distributed",
          "AES256 / distributed"})
        ok &= table.find(needle) != std::string::npos;
    report(7, "bench emits min/mean/max for every configuration row", ok,
           std::to_string(reports.size()) + " rows");
}

// --------------------------------------------------------------------------
// 8. Deadline verdicts under 3ms and 0ms latency models.
// --------------------------------------------------------------------------
void criterion_8() {
    const Application app = bench::build_case_study();
    bool ok = true;
    std::string detail;

    bench::BenchOptions opts;
    opts.cycles = 100;
    opts.latency_ms = 3.0;
    auto r3 = bench::run_latency_bench(app, opts);
    for (const auto& lr : r3.links) {
        ok &= lr.deadline_ms.has_value();
        ok &= lr.deadline_pass + lr.deadline_fail == 100;
    }

    opts.latency_ms = 0.0;
    auto r0 = bench::run_latency_bench(app, opts);
    std::size_t pass = 0, total = 0;
    for (const auto& lr : r0.links) {
        pass += lr.deadline_pass;
        total += lr.deadline_pass + lr.deadline_fail;
    }
    ok &= pass == total && total == 300;
    detail = "3ms model: verdicts sum to cycles; 0ms model: " + std::to_string(pass) + "/" +
             std::to_string(total) + " pass";
    report(8, "deadline verdicts: pass+fail == cycles; zero latency passes all", ok, detail);
}

// --------------------------------------------------------------------------
// 9. Wire format: inverse property over 10,000 frames plus the golden frame.
// --------------------------------------------------------------------------
void criterion_9() {
    std::mt19937_64 rng(0xF0A3);
    bool ok = true;
    for (int i = 0; i < 10000 && ok; ++i) {
        net::WireFrame f;
        switch (rng() % 4) {
            case 0:
                f.msg_type = net::MsgType::Data;
                f.payload.resize(16 * (1 + rng() % 3));
                break;
            case 1:
                f.msg_type = net::MsgType::KeInit;
                f.payload.resize(1 + rng() % 256);
                break;
            case 2:
                f.msg_type = net::MsgType::KeResp;
                f.payload.resize(1 + rng() % 256);
                break;
            default:
                f.msg_type = net::MsgType::Ts;
                f.payload.resize(8);
        }
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
        f.link_id = static_cast<std::uint32_t>(rng());
        f.sender_id = static_cast<std::uint16_t>(rng());
        f.key_epoch = static_cast<std::uint8_t>(rng());
        f.seq = static_cast<std::uint32_t>(rng());

        auto enc = net::encode_frame(f);
        if (!std::holds_alternative<byte_vec>(enc)) {
            ok = false;
            break;
        }
        auto dec = net::decode_frame(std::get<byte_vec>(enc));
        if (!dec.ok() || !(*dec.frame == f)) ok = false;
    }

    // hand-written golden frame, byte for byte
    net::WireFrame golden = net::make_data_frame(1, 2, 0, 0, byte_vec(16, 0xAA));
    const byte_vec expected = {0xFB, 0x5E, 0x01, 0x01, 0x00, 0x00, 0x00, 0x01, 0x00, 0x02, 0x00,
                               0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA,
                               0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA};
    ok &= std::get<byte_vec>(net::encode_frame(golden)) == expected;
    ok &= expected.size() == 33;
    report(9, "wire format: 10k-frame inverse property and 33-byte golden frame", ok);
}

// --------------------------------------------------------------------------
// 10. Parser: full corpus verdicts, round-trips, annotation semantics.
// --------------------------------------------------------------------------
void criterion_10() {
    namespace fs = std::filesystem;
    bool ok = true;
    std::string detail;
    std::size_t good = 0, bad = 0;

    const fs::path corpus(FBSEC_CORPUS_DIR);
    for (const auto& entry : fs::directory_iterator(corpus)) {
        if (entry.path().extension() != ".fbs") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        const bool expect_error = entry.path().filename().string().rfind("bad_", 0) == 0;

        auto res = fbs::parse_application(text, entry.path().filename().string());
        bool failed = !res.app.has_value();
        if (!failed) failed = has_errors(validate_application(*res.app));
        if (failed != expect_error) {
            ok = false;
            detail = "unexpected verdict for " + entry.path().filename().string();
            break;
        }
        if (expect_error) {
            ++bad;
            continue;
        }
        ++good;
        const std::string canon = fbs::serialize_application(*res.app);
        auto again = fbs::parse_application(canon);
        if (!again.app || !(*again.app == *res.app) ||
            fbs::serialize_application(*again.app) != canon) {
            ok = false;
            detail = "round-trip failure for " + entry.path().filename().string();
            break;
        }
    }
    ok &= good + bad >= 10;

    // annotation semantics: goal letter, algorithm token, variable key=value params
    {
        fbs::AnnotationAst ast;
        ast.keyword = "secure";
        ast.args = {"C", "AES", "keysize=128", "rekey=60s"};
        auto r = fbs::parse_secure_annotation(ast);
        ok &= r.fragment && r.fragment->goal == SecGoal::Confidentiality &&
              r.fragment->alg == "AES" &&
              r.fragment->params.at("keysize") == Value{std::uint64_t{128}} &&
              r.fragment->params.at("rekey") == Value{std::uint64_t{60000}};

        ast.args = {"I", "HMAC", "tag=SHA256"};
        r = fbs::parse_secure_annotation(ast);
        ok &= r.fragment && r.fragment->goal == SecGoal::Integrity &&
              r.fragment->params.at("tag") == Value{std::string("SHA256")};

        ast.args = {"A", "Redundant"};
        r = fbs::parse_secure_annotation(ast);
        ok &= r.fragment && r.fragment->goal == SecGoal::Availability;

        ast.args = {"X", "AES"};
        ok &= !fbs::parse_secure_annotation(ast).fragment;
    }
    if (detail.empty())
        detail = std::to_string(good) + " good + " + std::to_string(bad) + " rejected files";
    report(10, "parser corpus round-trips and @secure semantics", ok, detail);
}

}  // namespace

int main() {
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criterion_5();
        criterion_6();
        criterion_7();
        criterion_8();
        criterion_9();
        criterion_10();
    } catch (const std::exception& e) {
        std::cout << "FAIL  acceptance aborted: " << e.what() << "\n";
        return 1;
    }
    if (failures == 0) {
        std::cout << "all acceptance criteria passed\n";
        return 0;
    }
    std::cout << failures << " criteria failed\n";
    return 1;
}
