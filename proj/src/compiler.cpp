#include "fbsec/compiler.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "fbsec/parser.hpp"
#include "fbsec/services.hpp"

namespace fbsec::cl {

namespace {

constexpr std::uint64_t kDefaultKeTimeoutMs = 100;

std::string numbered(const char* stem, std::size_t index) {
    return index == 0 ? std::string(stem) : std::string(stem) + "_" + std::to_string(index - 1);
}

std::string port_n(const char* stem, std::size_t i, std::size_t n) {
    return n == 1 ? std::string(stem) : std::string(stem) + std::to_string(i);
}

std::string inst_n(const char* stem, std::size_t i, std::size_t n) {
    return n == 1 ? std::string(stem) : std::string(stem) + "_" + std::to_string(i);
}

// ---------------------------------------------------------------------------
// Generated composite types
// ---------------------------------------------------------------------------

PortRef bnd(const std::string& port) { return {"", port}; }
PortRef at(const std::string& inst, const std::string& port) { return {inst, port}; }

/// CLSender: the encrypting sender pipeline. Chain on each trip REQ:
/// SeqCounter -> TimeStampRecorder(t1) -> TsPublisher -> ConvertToArray ->
/// AESEncrypt -> Publisher. DHInitiator + AESKeyExp refresh the expanded key
/// once per session, re-triggered by E_CYCLE(rekey).
FBType make_clsender_type() {
    FBType t;
    t.name = "CLSender";
    t.kind = FBKind::Composite;
    t.network.emplace();

    auto& itf = t.interface;
    itf.event_inputs = {"REQ"};
    itf.event_outputs = {"CNF"};
    itf.with_assoc["REQ"] = {"D"};
    itf.data_inputs = {{"D", DataKind::Bool},     {"ID", DataKind::String},
                       {"KEID", DataKind::String}, {"TSID", DataKind::String},
                       {"KSIZE", DataKind::Uint},  {"REKEY", DataKind::Uint},
                       {"LINK", DataKind::Uint},   {"SENDER", DataKind::Uint},
                       {"TMO", DataKind::Uint}};

    FBNetwork& net = *t.network;
    net.add_instance("dhi", "DHInitiator");
    net.add_instance("cyc", "E_CYCLE");
    net.add_instance("pub", "Publisher");
    net.add_instance("tspub", "TsPublisher");
    net.add_instance("ctr", "SeqCounter");
    net.add_instance("ts1", "TimeStampRecorder");
    net.add_instance("c2a", "ConvertToArray");
    net.add_instance("kexp", "AESKeyExp");
    net.add_instance("enc", "AESEncrypt");

    net.param_bindings[{"dhi", "QI"}] = true;  // initiator role

    net.data_conns = {
        {bnd("KEID"), at("dhi", "ID")},   {bnd("KSIZE"), at("dhi", "KSIZE")},
        {bnd("LINK"), at("dhi", "LINK")}, {bnd("TMO"), at("dhi", "TMO")},
        {bnd("REKEY"), at("cyc", "DT")},
        {bnd("ID"), at("pub", "ID")},     {bnd("LINK"), at("pub", "LINK")},
        {bnd("SENDER"), at("pub", "SENDER")},
        {bnd("TSID"), at("tspub", "ID")}, {bnd("LINK"), at("tspub", "LINK")},
        {bnd("SENDER"), at("tspub", "SENDER")},
        {bnd("D"), at("c2a", "IN")},
        {at("dhi", "KEY"), at("kexp", "KEY")},
        {bnd("KSIZE"), at("kexp", "KSIZE")},
        {at("dhi", "EPOCH"), at("kexp", "EPIN")},
        {at("kexp", "EXPKEY"), at("enc", "EXPKEY")},
        {at("kexp", "EPOUT"), at("enc", "EPIN")},
        {at("c2a", "OUT"), at("enc", "PT")},
        {at("enc", "CT"), at("pub", "SD")},
        {at("enc", "EPOUT"), at("pub", "EPOCH")},
        {at("ctr", "SEQ"), at("pub", "SEQ")},
        {at("ctr", "SEQ"), at("tspub", "SEQ")},
        {at("ts1", "TS"), at("tspub", "TSVAL")},
    };

    net.event_conns = {
        {at("cyc", "EO"), at("dhi", "REQ")},   // periodic rekey
        {at("dhi", "CNF"), at("kexp", "REQ")},
        {bnd("REQ"), at("ctr", "REQ")},
        {at("ctr", "CNF"), at("ts1", "REQ")},  // t1 before the encrypt stage
        {at("ts1", "CNF"), at("tspub", "REQ")},
        {at("tspub", "CNF"), at("c2a", "REQ")},
        {at("c2a", "CNF"), at("enc", "REQ")},
        {at("enc", "CNF"), at("pub", "REQ")},
        {at("pub", "CNF"), bnd("CNF")},
    };
    return t;
}

/// Reference sender without the key exchange and cipher stages; the rest of
/// the pipeline (alias conversion, instrumentation, publishing) is shared.
FBType make_plainsender_type() {
    FBType t;
    t.name = "PlainSender";
    t.kind = FBKind::Composite;
    t.network.emplace();

    auto& itf = t.interface;
    itf.event_inputs = {"REQ"};
    itf.event_outputs = {"CNF"};
    itf.with_assoc["REQ"] = {"D"};
    itf.data_inputs = {{"D", DataKind::Bool},
                       {"ID", DataKind::String},
                       {"TSID", DataKind::String},
                       {"LINK", DataKind::Uint},
                       {"SENDER", DataKind::Uint}};

    FBNetwork& net = *t.network;
    net.add_instance("pub", "Publisher");
    net.add_instance("tspub", "TsPublisher");
    net.add_instance("ctr", "SeqCounter");
    net.add_instance("ts1", "TimeStampRecorder");
    net.add_instance("c2a", "ConvertToArray");

    net.param_bindings[{"pub", "EPOCH"}] = std::uint64_t{0};

    net.data_conns = {
        {bnd("ID"), at("pub", "ID")},
        {bnd("LINK"), at("pub", "LINK")},
        {bnd("SENDER"), at("pub", "SENDER")},
        {bnd("TSID"), at("tspub", "ID")},
        {bnd("LINK"), at("tspub", "LINK")},
        {bnd("SENDER"), at("tspub", "SENDER")},
        {bnd("D"), at("c2a", "IN")},
        {at("c2a", "OUT"), at("pub", "SD")},
        {at("ctr", "SEQ"), at("pub", "SEQ")},
        {at("ctr", "SEQ"), at("tspub", "SEQ")},
        {at("ts1", "TS"), at("tspub", "TSVAL")},
    };
    net.event_conns = {
        {bnd("REQ"), at("ctr", "REQ")},
        {at("ctr", "CNF"), at("ts1", "REQ")},
        {at("ts1", "CNF"), at("tspub", "REQ")},
        {at("tspub", "CNF"), at("c2a", "REQ")},
        {at("c2a", "CNF"), at("pub", "REQ")},
        {at("pub", "CNF"), bnd("CNF")},
    };
    return t;
}

/// CLRecv over `n` links sharing one data channel. Per link: DHResponder +
/// AESKeyExp feed a two-epoch KeyStore; the Subscriber selects the key by
/// the frame's epoch, AESDecrypt + ConvertFromArray recover the trip value,
/// TimeStampRecorder(t2) + Collector produce latency samples.
FBType make_clrecv_type(std::size_t n) {
    FBType t;
    t.name = n == 1 ? "CLRecv" : "CLRecv" + std::to_string(n);
    t.kind = FBKind::Composite;
    t.network.emplace();

    auto& itf = t.interface;
    itf.data_inputs = {{"ID", DataKind::String}, {"KSIZE", DataKind::Uint}, {"TMO", DataKind::Uint}};
    FBNetwork& net = *t.network;

    // responders first: their INIT subscriptions must land before boot ends
    for (std::size_t i = 0; i < n; ++i) net.add_instance(inst_n("resp", i, n), "DHResponder");
    for (std::size_t i = 0; i < n; ++i) net.add_instance(inst_n("sub", i, n), "Subscriber");
    for (std::size_t i = 0; i < n; ++i) net.add_instance(inst_n("tsub", i, n), "TsSubscriber");
    for (std::size_t i = 0; i < n; ++i) {
        net.add_instance(inst_n("kexp", i, n), "AESKeyExp");
        net.add_instance(inst_n("kst", i, n), "KeyStore");
        net.add_instance(inst_n("dec", i, n), "AESDecrypt");
        net.add_instance(inst_n("ts2", i, n), "TimeStampRecorder");
        net.add_instance(inst_n("c4a", i, n), "ConvertFromArray");
        net.add_instance(inst_n("col", i, n), "Collector");
    }

    for (std::size_t i = 0; i < n; ++i) {
        const std::string keid = port_n("KEID", i, n);
        const std::string tsid = port_n("TSID", i, n);
        const std::string link = port_n("LINK", i, n);
        itf.data_inputs.emplace_back(keid, DataKind::String);
        itf.data_inputs.emplace_back(tsid, DataKind::String);
        itf.data_inputs.emplace_back(link, DataKind::Uint);
        itf.event_outputs.push_back(port_n("IND", i, n));
        itf.data_outputs.emplace_back(port_n("D", i, n), DataKind::Bool);
        itf.with_assoc[port_n("IND", i, n)] = {port_n("D", i, n)};

        const std::string resp = inst_n("resp", i, n), sub = inst_n("sub", i, n),
                          tsub = inst_n("tsub", i, n), kexp = inst_n("kexp", i, n),
                          kst = inst_n("kst", i, n), dec = inst_n("dec", i, n),
                          ts2 = inst_n("ts2", i, n), c4a = inst_n("c4a", i, n),
                          col = inst_n("col", i, n);

        net.param_bindings[{resp, "QI"}] = false;  // responder role

        auto& dc = net.data_conns;
        dc.push_back({bnd(keid), at(resp, "ID")});
        dc.push_back({bnd("KSIZE"), at(resp, "KSIZE")});
        dc.push_back({bnd(link), at(resp, "LINK")});
        dc.push_back({bnd("TMO"), at(resp, "TMO")});
        dc.push_back({bnd("ID"), at(sub, "ID")});
        dc.push_back({bnd(link), at(sub, "LINK")});
        dc.push_back({bnd(tsid), at(tsub, "ID")});
        dc.push_back({bnd(link), at(tsub, "LINK")});
        dc.push_back({at(resp, "KEY"), at(kexp, "KEY")});
        dc.push_back({bnd("KSIZE"), at(kexp, "KSIZE")});
        dc.push_back({at(resp, "EPOCH"), at(kexp, "EPIN")});
        dc.push_back({at(kexp, "EXPKEY"), at(kst, "KEYIN")});
        dc.push_back({at(kexp, "EPOUT"), at(kst, "EPIN")});
        dc.push_back({at(sub, "EPOCH"), at(kst, "WANT")});
        dc.push_back({at(sub, "CT"), at(dec, "CT")});
        dc.push_back({at(kst, "KEYOUT"), at(dec, "EXPKEY")});
        dc.push_back({at(dec, "PT"), at(c4a, "IN")});
        dc.push_back({at(c4a, "OUT"), bnd(port_n("D", i, n))});
        dc.push_back({at(tsub, "SEQ"), at(col, "SEQ1")});
        dc.push_back({at(tsub, "TSVAL"), at(col, "TSV")});
        dc.push_back({at(sub, "SEQ"), at(col, "SEQ2")});
        dc.push_back({at(ts2, "TS"), at(col, "TSR")});
        dc.push_back({at(sub, "EPOCH"), at(col, "EP")});
        dc.push_back({bnd(link), at(col, "LINK")});

        auto& ec = net.event_conns;
        ec.push_back({at(resp, "CNF"), at(kexp, "REQ")});
        ec.push_back({at(kexp, "CNF"), at(kst, "NEWKEY")});
        ec.push_back({at(sub, "IND"), at(kst, "SEL")});
        ec.push_back({at(kst, "SELO"), at(dec, "REQ")});
        ec.push_back({at(dec, "CNF"), at(ts2, "REQ")});  // t2 right after decryption
        ec.push_back({at(ts2, "CNF"), at(c4a, "REQ")});
        ec.push_back({at(ts2, "CNF"), at(col, "T2")});
        ec.push_back({at(tsub, "IND"), at(col, "T1")});
        ec.push_back({at(c4a, "CNF"), bnd(port_n("IND", i, n))});
    }
    return t;
}

FBType make_plainrecv_type(std::size_t n) {
    FBType t;
    t.name = n == 1 ? "PlainRecv" : "PlainRecv" + std::to_string(n);
    t.kind = FBKind::Composite;
    t.network.emplace();

    auto& itf = t.interface;
    itf.data_inputs = {{"ID", DataKind::String}};
    FBNetwork& net = *t.network;

    for (std::size_t i = 0; i < n; ++i) net.add_instance(inst_n("sub", i, n), "Subscriber");
    for (std::size_t i = 0; i < n; ++i) net.add_instance(inst_n("tsub", i, n), "TsSubscriber");
    for (std::size_t i = 0; i < n; ++i) {
        net.add_instance(inst_n("ts2", i, n), "TimeStampRecorder");
        net.add_instance(inst_n("c4a", i, n), "ConvertFromArray");
        net.add_instance(inst_n("col", i, n), "Collector");
    }

    for (std::size_t i = 0; i < n; ++i) {
        const std::string tsid = port_n("TSID", i, n);
        const std::string link = port_n("LINK", i, n);
        itf.data_inputs.emplace_back(tsid, DataKind::String);
        itf.data_inputs.emplace_back(link, DataKind::Uint);
        itf.event_outputs.push_back(port_n("IND", i, n));
        itf.data_outputs.emplace_back(port_n("D", i, n), DataKind::Bool);
        itf.with_assoc[port_n("IND", i, n)] = {port_n("D", i, n)};

        const std::string sub = inst_n("sub", i, n), tsub = inst_n("tsub", i, n),
                          ts2 = inst_n("ts2", i, n), c4a = inst_n("c4a", i, n),
                          col = inst_n("col", i, n);

        auto& dc = net.data_conns;
        dc.push_back({bnd("ID"), at(sub, "ID")});
        dc.push_back({bnd(link), at(sub, "LINK")});
        dc.push_back({bnd(tsid), at(tsub, "ID")});
        dc.push_back({bnd(link), at(tsub, "LINK")});
        dc.push_back({at(sub, "CT"), at(c4a, "IN")});
        dc.push_back({at(c4a, "OUT"), bnd(port_n("D", i, n))});
        dc.push_back({at(tsub, "SEQ"), at(col, "SEQ1")});
        dc.push_back({at(tsub, "TSVAL"), at(col, "TSV")});
        dc.push_back({at(sub, "SEQ"), at(col, "SEQ2")});
        dc.push_back({at(ts2, "TS"), at(col, "TSR")});
        dc.push_back({at(sub, "EPOCH"), at(col, "EP")});
        dc.push_back({bnd(link), at(col, "LINK")});

        auto& ec = net.event_conns;
        ec.push_back({at(sub, "IND"), at(ts2, "REQ")});
        ec.push_back({at(ts2, "CNF"), at(c4a, "REQ")});
        ec.push_back({at(ts2, "CNF"), at(col, "T2")});
        ec.push_back({at(tsub, "IND"), at(col, "T1")});
        ec.push_back({at(c4a, "CNF"), bnd(port_n("IND", i, n))});
    }
    return t;
}

struct EligibleLink {
    const SecureLink* link;
    std::size_t link_index;  // among eligible links
    std::string source_device, target_device;
    std::string producer_instance, consumer_instance;
};

}  // namespace

// ---------------------------------------------------------------------------
// Channel allocation
// ---------------------------------------------------------------------------

std::vector<ChannelTriple> allocate_channels(const std::vector<SecureLink>& links,
                                             const std::vector<std::string>& target_devices,
                                             const net::ChannelId& base) {
    std::vector<ChannelTriple> out;
    out.reserve(links.size());
    for (std::size_t i = 0; i < links.size(); ++i) {
        const std::uint64_t port = static_cast<std::uint64_t>(base.port) + 3 * i;
        if (port + 2 > 65535)
            throw ChannelAllocError("channel allocation overflows port 65535 at link " +
                                    std::to_string(i + 1));
        ChannelTriple triple;
        triple.data = {base.group, static_cast<std::uint16_t>(port)};
        triple.ke = {base.group, static_cast<std::uint16_t>(port + 1)};
        triple.ts = {base.group, static_cast<std::uint16_t>(port + 2)};
        out.push_back(triple);
    }

    // Sharing collapse: same explicit channel tag, identical cipher
    // parameters, same target device -> the group leader's data channel.
    for (std::size_t j = 0; j < links.size(); ++j) {
        const auto tag_j = links[j].channel_tag();
        if (!tag_j) continue;
        for (std::size_t i = 0; i < j; ++i) {
            const auto tag_i = links[i].channel_tag();
            if (!tag_i || *tag_i != *tag_j) continue;
            if (target_devices[i] != target_devices[j]) continue;
            if (links[i].alg != links[j].alg) continue;
            if (links[i].keysize_bits() != links[j].keysize_bits()) continue;
            if (links[i].rekey_ms() != links[j].rekey_ms()) continue;
            out[j].data = out[i].data;
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lowering
// ---------------------------------------------------------------------------

CompileResult compile_secure_links(const Application& app, const CompileOptions& opts) {
    CompileResult res;
    res.diags = validate_application(app);
    if (has_errors(res.diags)) return res;

    DeploymentPlan plan;
    plan.devices = app.devices;
    plan.with_encryption = opts.with_encryption;

    auto device_of = [&](const std::string& inst) { return app.mapping.at(inst); };
    auto data_kind_of = [&](const PortRef& ref) -> std::optional<DataKind> {
        const std::string* tn = app.root.type_of(ref.instance);
        if (!tn) return std::nullopt;
        const FBType* t = app.find_type(*tn);
        return t ? t->interface.data_output_kind(ref.port) : std::nullopt;
    };

    // Classify annotations.
    std::vector<EligibleLink> eligible;
    std::set<std::pair<PortRef, PortRef>> lowered_conns;
    for (std::size_t i = 0; i < app.secure_links.size(); ++i) {
        const SecureLink& sl = app.secure_links[i];
        const std::string where = "secure_links[" + std::to_string(i) + "]";

        if (sl.goal != SecGoal::Confidentiality) {
            res.diags.push_back({Severity::Error, where,
                                 std::string("unsupported goal ") + goal_name(sl.goal) +
                                     ": only Confidentiality lowers today",
                                 std::nullopt});
            continue;
        }
        if (sl.alg != "AES") {
            res.diags.push_back({Severity::Error, where,
                                 "unsupported algorithm '" + sl.alg + "': only AES is available",
                                 std::nullopt});
            continue;
        }
        if (device_of(sl.d_con.from.instance) == device_of(sl.d_con.to.instance)) {
            res.diags.push_back({Severity::Warning, where,
                                 "secure link " + sl.d_con.from.str() + " -> " + sl.d_con.to.str() +
                                     " stays on one device; left untransformed",
                                 std::nullopt});
            continue;
        }
        if (data_kind_of(sl.d_con.from) != DataKind::Bool) {
            res.diags.push_back({Severity::Error, where,
                                 "only BOOL data connections are supported by the "
                                 "confidentiality layer",
                                 std::nullopt});
            continue;
        }
        EligibleLink el;
        el.link = &sl;
        el.link_index = eligible.size();
        el.producer_instance = sl.d_con.from.instance;
        el.consumer_instance = sl.d_con.to.instance;
        el.source_device = device_of(el.producer_instance);
        el.target_device = device_of(el.consumer_instance);
        eligible.push_back(el);
        lowered_conns.insert({sl.d_con.from, sl.d_con.to});
    }
    if (has_errors(res.diags)) return res;

    std::vector<SecureLink> alloc_links;
    std::vector<std::string> alloc_targets;
    for (const auto& el : eligible) {
        alloc_links.push_back(*el.link);
        alloc_targets.push_back(el.target_device);
    }
    std::vector<ChannelTriple> channels;
    try {
        channels = allocate_channels(alloc_links, alloc_targets, opts.base);
    } catch (const ChannelAllocError& e) {
        res.diags.push_back({Severity::Error, "channels", e.what(), std::nullopt});
        return res;
    }

    // Event connections between an annotated link's endpoints travel through
    // that link's sender/receiver pair.
    std::map<std::pair<std::string, std::string>, std::size_t> pair_to_link;
    for (const auto& el : eligible) {
        auto key = std::make_pair(el.producer_instance, el.consumer_instance);
        if (pair_to_link.count(key)) {
            plan.warnings.push_back(
                {Severity::Warning, "secure_links",
                 "multiple annotated links between '" + el.producer_instance + "' and '" +
                     el.consumer_instance + "'; their event connections route via the first link",
                 std::nullopt});
            continue;
        }
        pair_to_link[key] = el.link_index;
    }

    // Naive device split.
    for (const auto& dev : app.devices) plan.device_networks[dev];
    for (const auto& [inst, type] : app.root.instances)
        plan.device_networks[device_of(inst)].add_instance(inst, type);
    for (const auto& [key, value] : app.root.param_bindings)
        plan.device_networks[device_of(key.first)].param_bindings[key] = value;

    struct RoutedEvent {
        std::size_t link_index;
        PortRef from, to;
    };
    std::vector<RoutedEvent> routed_events;
    for (const auto& conn : app.root.event_conns) {
        const std::string from_dev = device_of(conn.from.instance);
        const std::string to_dev = device_of(conn.to.instance);
        if (from_dev == to_dev) {
            plan.device_networks[from_dev].event_conns.push_back(conn);
            continue;
        }
        auto it = pair_to_link.find({conn.from.instance, conn.to.instance});
        if (it != pair_to_link.end()) {
            routed_events.push_back({it->second, conn.from, conn.to});
        } else {
            plan.warnings.push_back({Severity::Warning, "root",
                                     "cross-device event connection " + conn.from.str() + " -> " +
                                         conn.to.str() + " has no secure link; dropped",
                                     std::nullopt});
        }
    }
    for (const auto& conn : app.root.data_conns) {
        if (lowered_conns.count({conn.from, conn.to})) continue;  // replaced by CL pair
        const std::string from_dev = device_of(conn.from.instance);
        const std::string to_dev = device_of(conn.to.instance);
        if (from_dev == to_dev) {
            plan.device_networks[from_dev].data_conns.push_back(conn);
        } else {
            plan.warnings.push_back({Severity::Warning, "root",
                                     "cross-device data connection " + conn.from.str() + " -> " +
                                         conn.to.str() + " has no secure link; dropped",
                                     std::nullopt});
        }
    }

    // Receivers, grouped by (target device, shared data channel).
    struct RecvGroup {
        std::string device;
        net::ChannelId data_channel;
        std::vector<std::size_t> link_indices;
    };
    std::vector<RecvGroup> groups;
    for (const auto& el : eligible) {
        const auto& ch = channels[el.link_index].data;
        auto it = std::find_if(groups.begin(), groups.end(), [&](const RecvGroup& g) {
            return g.device == el.target_device && g.data_channel == ch;
        });
        if (it == groups.end())
            groups.push_back({el.target_device, ch, {el.link_index}});
        else
            it->link_indices.push_back(el.link_index);
    }

    const char* recv_stem = opts.with_encryption ? "CLRecv" : "PlainRecv";
    const char* send_stem = opts.with_encryption ? "CLSender" : "PlainSender";

    if (opts.with_encryption)
        plan.fb_types["CLSender"] = make_clsender_type();
    else
        plan.fb_types["PlainSender"] = make_plainsender_type();

    std::vector<std::string> recv_instance_of_link(eligible.size());
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> recv_prepends;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const RecvGroup& group = groups[g];
        const std::size_t n = group.link_indices.size();
        FBType recv_type = opts.with_encryption ? make_clrecv_type(n) : make_plainrecv_type(n);
        plan.fb_types[recv_type.name] = recv_type;

        const std::string inst = numbered(recv_stem, g);
        FBNetwork& net = plan.device_networks[group.device];
        recv_prepends[group.device].emplace_back(inst, recv_type.name);

        net.param_bindings[{inst, "ID"}] = group.data_channel.str();
        if (opts.with_encryption) {
            net.param_bindings[{inst, "KSIZE"}] = *eligible[group.link_indices[0]].link->keysize_bits();
            net.param_bindings[{inst, "TMO"}] = kDefaultKeTimeoutMs;
        }

        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t li = group.link_indices[i];
            const EligibleLink& el = eligible[li];
            recv_instance_of_link[li] = inst;
            if (opts.with_encryption)
                net.param_bindings[{inst, port_n("KEID", i, n)}] = channels[li].ke.str();
            net.param_bindings[{inst, port_n("TSID", i, n)}] = channels[li].ts.str();
            net.param_bindings[{inst, port_n("LINK", i, n)}] = static_cast<std::uint64_t>(li + 1);

            net.data_conns.push_back({at(inst, port_n("D", i, n)), el.link->d_con.to});
            for (const auto& re : routed_events)
                if (re.link_index == li)
                    net.event_conns.push_back({at(inst, port_n("IND", i, n)), re.to});
        }
    }

    // Senders, one per link in declaration order.
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> send_prepends;
    for (const auto& el : eligible) {
        const std::size_t li = el.link_index;
        const std::string inst = numbered(send_stem, li);
        FBNetwork& net = plan.device_networks[el.source_device];
        send_prepends[el.source_device].emplace_back(inst, opts.with_encryption ? "CLSender"
                                                                                : "PlainSender");

        const std::uint16_t sender_id = static_cast<std::uint16_t>(
            1 + std::distance(app.devices.begin(),
                              std::find(app.devices.begin(), app.devices.end(), el.source_device)));

        net.param_bindings[{inst, "ID"}] = channels[li].data.str();
        net.param_bindings[{inst, "TSID"}] = channels[li].ts.str();
        net.param_bindings[{inst, "LINK"}] = static_cast<std::uint64_t>(li + 1);
        net.param_bindings[{inst, "SENDER"}] = static_cast<std::uint64_t>(sender_id);
        if (opts.with_encryption) {
            net.param_bindings[{inst, "KEID"}] = channels[li].ke.str();
            net.param_bindings[{inst, "KSIZE"}] = *el.link->keysize_bits();
            net.param_bindings[{inst, "REKEY"}] = *el.link->rekey_ms();
            net.param_bindings[{inst, "TMO"}] = kDefaultKeTimeoutMs;
        }

        net.data_conns.push_back({el.link->d_con.from, at(inst, "D")});
        bool any_trigger = false;
        for (const auto& re : routed_events) {
            if (re.link_index != li) continue;
            net.event_conns.push_back({re.from, at(inst, "REQ")});
            any_trigger = true;
        }
        if (!any_trigger)
            plan.warnings.push_back({Severity::Warning, "secure_links",
                                     "secure link " + el.link->d_con.from.str() + " -> " +
                                         el.link->d_con.to.str() +
                                         " has no accompanying event connection; its sender "
                                         "never fires",
                                     std::nullopt});

        CompiledLink cl;
        cl.link = *el.link;
        cl.link_id = static_cast<std::uint32_t>(li + 1);
        cl.sender_id = sender_id;
        cl.channels = channels[li];
        cl.source_device = el.source_device;
        cl.target_device = el.target_device;
        cl.sender_instance = inst;
        cl.recv_instance = recv_instance_of_link[li];
        plan.links.push_back(std::move(cl));
    }

    // Generated instances go in front so their INITs boot before the
    // application's own blocks.
    for (auto& [dev, net] : plan.device_networks) {
        std::vector<std::pair<std::string, std::string>> ordered;
        auto ri = recv_prepends.find(dev);
        if (ri != recv_prepends.end())
            ordered.insert(ordered.end(), ri->second.begin(), ri->second.end());
        auto si = send_prepends.find(dev);
        if (si != send_prepends.end())
            ordered.insert(ordered.end(), si->second.begin(), si->second.end());
        ordered.insert(ordered.end(), net.instances.begin(), net.instances.end());
        net.instances = std::move(ordered);
    }

    // User-defined types ride along for self-contained device documents.
    for (const auto& [name, type] : app.fb_types)
        if (!rt::is_standard_type(name)) plan.fb_types[name] = type;

    for (const auto& w : plan.warnings) res.diags.push_back(w);
    plan.warnings = res.diags;  // keep the full set with the plan
    res.plan = std::move(plan);
    return res;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace {

void collect_used_types(const std::map<std::string, FBType>& pool, const FBNetwork& net,
                        std::map<std::string, FBType>& out) {
    for (const auto& [inst, type_name] : net.instances) {
        auto it = pool.find(type_name);
        if (it == pool.end() || out.count(type_name)) continue;
        out[type_name] = it->second;
        if (it->second.kind == FBKind::Composite && it->second.network)
            collect_used_types(pool, *it->second.network, out);
    }
}

}  // namespace

std::map<std::string, std::string> emit_plan(const DeploymentPlan& plan) {
    std::map<std::string, std::string> docs;
    for (const auto& dev : plan.devices) {
        const FBNetwork& net = plan.device_networks.at(dev);

        Application doc;
        doc.fb_types = rt::standard_library();
        std::map<std::string, FBType> used;
        collect_used_types(plan.fb_types, net, used);
        for (auto& [name, type] : used) doc.fb_types[name] = type;
        doc.root = net;
        doc.devices = {dev};
        for (const auto& [inst, type] : net.instances) doc.mapping[inst] = dev;

        docs[dev] = fbs::serialize_application(doc);
    }
    return docs;
}

std::string emit_manifest(const DeploymentPlan& plan, const net::ChannelId& base) {
    std::ostringstream os;
    os << "# channel manifest\n";
    os << "base " << base.str() << "\n";
    os << "cipher " << (plan.with_encryption ? "AES" : "none") << "\n";
    for (const auto& link : plan.links) {
        os << "link " << link.link_id << " " << link.link.d_con.from.str() << " -> "
           << link.link.d_con.to.str() << " keysize " << link.link.keysize_bits().value_or(0)
           << " rekey_ms " << link.link.rekey_ms().value_or(0) << " data "
           << link.channels.data.str() << " ke " << link.channels.ke.str() << " ts "
           << link.channels.ts.str() << " initiator " << link.source_device << " responder "
           << link.target_device << " sender_id " << link.sender_id << " sender_fb "
           << link.sender_instance << " receiver_fb " << link.recv_instance << "\n";
    }
    return os.str();
}

}  // namespace fbsec::cl
