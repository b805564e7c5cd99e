#include "fbsec/casestudy.hpp"

#include "fbsec/services.hpp"

namespace fbsec::bench {

ProtectionConfig default_protection(ProtectionFunction f) {
    switch (f) {
        case ProtectionFunction::Overcurrent: return {f, 100.0, 600};
        case ProtectionFunction::Differential: return {f, 1.0, 5};
        case ProtectionFunction::EarthFault: return {f, 20.0, 5};
    }
    return {f, 0.0, 0};
}

std::optional<ProtectionConfig> protection_for_type(const std::string& fb_type_name) {
    if (fb_type_name == "OverCurrent") return default_protection(ProtectionFunction::Overcurrent);
    if (fb_type_name == "Differential") return default_protection(ProtectionFunction::Differential);
    if (fb_type_name == "EarthFault") return default_protection(ProtectionFunction::EarthFault);
    return std::nullopt;
}

Application build_case_study() {
    Application app;
    app.fb_types = rt::standard_library();

    FBNetwork& net = app.root;
    net.add_instance("clk_dp", "E_CYCLE");
    net.add_instance("src_dp", "DualCurrentSource");
    net.add_instance("dp", "Differential");
    net.add_instance("clk_ef", "E_CYCLE");
    net.add_instance("src_ef", "CurrentSource");
    net.add_instance("ef", "EarthFault");
    net.add_instance("clk_oc", "E_CYCLE");
    net.add_instance("src_oc", "CurrentSource");
    net.add_instance("oc", "OverCurrent");
    net.add_instance("cb", "Breaker");

    const std::uint64_t scan_ms = 10;
    net.param_bindings[{"clk_dp", "DT"}] = scan_ms;
    net.param_bindings[{"clk_ef", "DT"}] = scan_ms;
    net.param_bindings[{"clk_oc", "DT"}] = scan_ms;
    net.param_bindings[{"dp", "THRESH"}] =
        default_protection(ProtectionFunction::Differential).threshold_amps;
    net.param_bindings[{"ef", "THRESH"}] =
        default_protection(ProtectionFunction::EarthFault).threshold_amps;
    net.param_bindings[{"oc", "THRESH"}] =
        default_protection(ProtectionFunction::Overcurrent).threshold_amps;

    auto ev = [&](const char* fi, const char* fp, const char* ti, const char* tp) {
        net.event_conns.push_back({{fi, fp}, {ti, tp}});
    };
    ev("clk_dp", "EO", "src_dp", "TICK");
    ev("src_dp", "CNF", "dp", "REQ");
    ev("dp", "CNF", "cb", "REQ");
    ev("clk_ef", "EO", "src_ef", "TICK");
    ev("src_ef", "CNF", "ef", "REQ");
    ev("ef", "CNF", "cb", "REQ");
    ev("clk_oc", "EO", "src_oc", "TICK");
    ev("src_oc", "CNF", "oc", "REQ");
    ev("oc", "CNF", "cb", "REQ");

    auto dc = [&](const char* fi, const char* fp, const char* ti, const char* tp) {
        net.data_conns.push_back({{fi, fp}, {ti, tp}});
        return net.data_conns.back();
    };
    dc("src_dp", "I1", "dp", "I1");
    dc("src_dp", "I2", "dp", "I2");
    dc("src_ef", "I", "ef", "I");
    dc("src_oc", "I", "oc", "I");
    const DataConn dp_trip = dc("dp", "TRIP", "cb", "T_DP");
    const DataConn ef_trip = dc("ef", "TRIP", "cb", "T_EF");
    const DataConn oc_trip = dc("oc", "TRIP", "cb", "T_OC");

    auto secure = [&](const DataConn& conn, std::uint64_t keysize, const char* channel) {
        SecureLink sl;
        sl.d_con = conn;
        sl.goal = SecGoal::Confidentiality;
        sl.alg = "AES";
        sl.params["keysize"] = keysize;
        sl.params["rekey"] = std::uint64_t{60000};
        if (channel) sl.params["channel"] = std::string(channel);
        app.secure_links.push_back(std::move(sl));
    };
    // The strict 5 ms functions run 128-bit keys and share one channel; the
    // relaxed overcurrent link affords 256-bit on its own channel.
    secure(dp_trip, 128, "trips");
    secure(ef_trip, 128, "trips");
    secure(oc_trip, 256, nullptr);

    app.devices = {"ied_dp", "ied_ef", "ied_oc", "breaker"};
    app.mapping = {{"clk_dp", "ied_dp"}, {"src_dp", "ied_dp"}, {"dp", "ied_dp"},
                   {"clk_ef", "ied_ef"}, {"src_ef", "ied_ef"}, {"ef", "ied_ef"},
                   {"clk_oc", "ied_oc"}, {"src_oc", "ied_oc"}, {"oc", "ied_oc"},
                   {"cb", "breaker"}};
    return app;
}

}  // namespace fbsec::bench
