#include <algorithm>
#include <set>

#include "fbsec/guard.hpp"
#include "fbsec/model.hpp"

namespace fbsec {

namespace {

class Validator {
public:
    explicit Validator(const Application& app) : app_(app) {}

    std::vector<Diagnostic> run() {
        for (const auto& [name, type] : app_.fb_types) check_type(type);
        check_network(app_.root, "root", nullptr);
        check_mapping();
        check_secure_links();
        return std::move(diags_);
    }

private:
    void error(std::string where, std::string message) {
        diags_.push_back({Severity::Error, std::move(where), std::move(message), std::nullopt});
    }

    static bool unique_names(const std::vector<std::string>& names) {
        std::set<std::string> seen(names.begin(), names.end());
        return seen.size() == names.size();
    }

    void check_interface(const FBType& t) {
        const std::string where = "fbtype " + t.name + "/interface";
        const auto& itf = t.interface;

        if (!unique_names(itf.event_inputs)) error(where, "duplicate event input name");
        if (!unique_names(itf.event_outputs)) error(where, "duplicate event output name");
        auto port_names = [](const std::vector<std::pair<std::string, DataKind>>& ports) {
            std::vector<std::string> names;
            for (const auto& [n, k] : ports) names.push_back(n);
            return names;
        };
        if (!unique_names(port_names(itf.data_inputs))) error(where, "duplicate data input name");
        if (!unique_names(port_names(itf.data_outputs))) error(where, "duplicate data output name");

        for (const auto& [event, ports] : itf.with_assoc) {
            const bool in = itf.has_event_input(event);
            const bool out = itf.has_event_output(event);
            if (!in && !out) {
                error(where, "with-association on unknown event '" + event + "'");
                continue;
            }
            for (const auto& port : ports) {
                const bool ok = in ? itf.data_input_kind(port).has_value()
                                   : itf.data_output_kind(port).has_value();
                if (!ok)
                    error(where, "event '" + event + "' associates unknown or wrong-direction port '" +
                                     port + "'");
            }
        }
    }

    void check_ecc(const FBType& t) {
        const std::string where = "fbtype " + t.name + "/ecc";
        const Ecc& ecc = *t.ecc;
        const std::set<std::string> states(ecc.states.begin(), ecc.states.end());

        if (!unique_names(ecc.states)) error(where, "duplicate state name");
        if (!states.count(ecc.initial)) error(where, "initial state '" + ecc.initial + "' not declared");

        std::set<std::string> declared_names;
        for (const auto& [n, k] : t.interface.data_inputs) declared_names.insert(n);
        for (const auto& var : ecc.internal_vars) {
            if (!declared_names.insert(var.name).second)
                error(where, "internal variable '" + var.name + "' clashes with another name");
            if (var.init && kind_of(*var.init) != var.kind)
                error(where, "internal variable '" + var.name + "' initialised with wrong kind");
        }

        for (const auto& tr : ecc.transitions) {
            if (!states.count(tr.from))
                error(where, "transition from undeclared state '" + tr.from + "'");
            if (!states.count(tr.to)) error(where, "transition to undeclared state '" + tr.to + "'");
            if (tr.trigger && !t.interface.has_event_input(*tr.trigger))
                error(where, "transition triggered by undeclared event '" + *tr.trigger + "'");
            if (tr.guard) {
                auto parsed = parse_guard(*tr.guard);
                if (!parsed.expr) {
                    error(where, "guard '" + *tr.guard + "': " + parsed.error);
                    continue;
                }
                for (const auto& ref : guard_refs(*parsed.expr)) {
                    if (!declared_names.count(ref))
                        error(where, "guard references '" + ref +
                                         "', which is neither a data input nor an internal variable");
                }
            }
        }

        for (const auto& [state, actions] : ecc.actions) {
            if (!states.count(state)) error(where, "actions attached to undeclared state '" + state + "'");
            for (const auto& a : actions)
                if (a.emit && !t.interface.has_event_output(*a.emit))
                    error(where, "action emits undeclared event '" + *a.emit + "'");
        }
    }

    void check_type(const FBType& t) {
        check_interface(t);
        const std::string where = "fbtype " + t.name;
        switch (t.kind) {
            case FBKind::Basic:
                if (!t.ecc) error(where, "basic FB without an ECC");
                if (t.network) error(where, "basic FB must not carry a network");
                if (!t.service.empty()) error(where, "basic FB must not carry a service binding");
                if (t.ecc) check_ecc(t);
                break;
            case FBKind::Composite:
                if (!t.network) error(where, "composite FB without a network");
                if (t.ecc) error(where, "composite FB must not carry an ECC");
                if (!t.service.empty()) error(where, "composite FB must not carry a service binding");
                if (t.network) check_network(*t.network, where + "/network", &t);
                break;
            case FBKind::Sifb:
                if (t.service.empty()) error(where, "service interface FB without a service name");
                if (t.ecc || t.network) error(where, "service interface FB must carry only an interface");
                break;
        }
    }

    struct ResolvedPort {
        DataKind kind;
        bool ok;
    };

    // Resolves a connection endpoint inside `net`. `owner` is the enclosing
    // composite type (boundary ports), null for the root network.
    std::optional<DataKind> data_endpoint_kind(const FBNetwork& net, const FBType* owner,
                                               const PortRef& ref, bool as_source,
                                               const std::string& where) {
        if (ref.is_boundary()) {
            if (!owner) {
                error(where, "boundary reference '" + ref.port + "' outside a composite");
                return std::nullopt;
            }
            // A boundary data input feeds internal consumers; a boundary data
            // output is fed by internal producers.
            auto kind = as_source ? owner->interface.data_input_kind(ref.port)
                                  : owner->interface.data_output_kind(ref.port);
            if (!kind)
                error(where, "boundary data port '" + ref.port + "' not declared on the interface");
            return kind;
        }
        const std::string* type_name = net.type_of(ref.instance);
        if (!type_name) {
            error(where, "connection endpoint names unknown instance '" + ref.instance + "'");
            return std::nullopt;
        }
        const FBType* t = app_.find_type(*type_name);
        if (!t) return std::nullopt;  // reported once by instance check
        auto kind = as_source ? t->interface.data_output_kind(ref.port)
                              : t->interface.data_input_kind(ref.port);
        if (!kind)
            error(where, "instance '" + ref.instance + "' has no data " +
                             (as_source ? "output" : "input") + " named '" + ref.port + "'");
        return kind;
    }

    bool event_endpoint_ok(const FBNetwork& net, const FBType* owner, const PortRef& ref,
                           bool as_source, const std::string& where) {
        if (ref.is_boundary()) {
            if (!owner) {
                error(where, "boundary reference '" + ref.port + "' outside a composite");
                return false;
            }
            const bool ok = as_source ? owner->interface.has_event_input(ref.port)
                                      : owner->interface.has_event_output(ref.port);
            if (!ok) error(where, "boundary event '" + ref.port + "' not declared on the interface");
            return ok;
        }
        const std::string* type_name = net.type_of(ref.instance);
        if (!type_name) {
            error(where, "connection endpoint names unknown instance '" + ref.instance + "'");
            return false;
        }
        const FBType* t = app_.find_type(*type_name);
        if (!t) return false;
        const bool ok = as_source ? t->interface.has_event_output(ref.port)
                                  : t->interface.has_event_input(ref.port);
        if (!ok)
            error(where, "instance '" + ref.instance + "' has no event " +
                             (as_source ? "output" : "input") + " named '" + ref.port + "'");
        return ok;
    }

    void check_network(const FBNetwork& net, const std::string& where, const FBType* owner) {
        std::set<std::string> names;
        for (const auto& [name, type] : net.instances) {
            if (!names.insert(name).second) error(where, "duplicate instance name '" + name + "'");
            if (!app_.find_type(type))
                error(where, "instance '" + name + "' uses unknown FB type '" + type + "'");
        }

        for (const auto& conn : net.event_conns) {
            event_endpoint_ok(net, owner, conn.from, true, where);
            event_endpoint_ok(net, owner, conn.to, false, where);
        }

        std::map<PortRef, int> writers;
        for (const auto& conn : net.data_conns) {
            auto from_kind = data_endpoint_kind(net, owner, conn.from, true, where);
            auto to_kind = data_endpoint_kind(net, owner, conn.to, false, where);
            if (from_kind && to_kind && *from_kind != *to_kind)
                error(where, "data connection " + conn.from.str() + " -> " + conn.to.str() +
                                 " joins " + kind_name(*from_kind) + " to " + kind_name(*to_kind));
            if (!conn.to.is_boundary() && ++writers[conn.to] > 1)
                error(where, "data input " + conn.to.str() + " has more than one incoming connection");
        }

        for (const auto& [key, value] : net.param_bindings) {
            const auto& [inst, port] = key;
            const std::string* type_name = net.type_of(inst);
            if (!type_name) {
                error(where, "parameter binding on unknown instance '" + inst + "'");
                continue;
            }
            const FBType* t = app_.find_type(*type_name);
            if (!t) continue;
            auto kind = t->interface.data_input_kind(port);
            if (!kind) {
                error(where, "parameter binding on unknown data input " + inst + "." + port);
                continue;
            }
            if (kind_of(value) != *kind)
                error(where, "parameter " + inst + "." + port + " bound to a " +
                                 kind_name(kind_of(value)) + " literal, port is " + kind_name(*kind));
            if (writers.count({inst, port}))
                error(where, "parameter binding on connected data input " + inst + "." + port);
        }
    }

    void check_mapping() {
        const std::set<std::string> devices(app_.devices.begin(), app_.devices.end());
        if (devices.size() != app_.devices.size()) error("devices", "duplicate device name");

        for (const auto& [inst, type] : app_.root.instances) {
            auto it = app_.mapping.find(inst);
            if (it == app_.mapping.end())
                error("map", "root instance '" + inst + "' is not mapped to a device");
            else if (!devices.count(it->second))
                error("map", "instance '" + inst + "' mapped to undeclared device '" + it->second + "'");
        }
        for (const auto& [inst, dev] : app_.mapping)
            if (!app_.root.has_instance(inst))
                error("map", "mapping names unknown instance '" + inst + "'");
    }

    void check_secure_links() {
        std::map<std::pair<PortRef, PortRef>, int> per_conn;
        for (std::size_t i = 0; i < app_.secure_links.size(); ++i) {
            const auto& sl = app_.secure_links[i];
            const std::string where = "secure_links[" + std::to_string(i) + "]";

            const bool exists =
                std::any_of(app_.root.data_conns.begin(), app_.root.data_conns.end(),
                            [&](const DataConn& c) { return c == sl.d_con; });
            if (!exists)
                error(where, "annotation references non-existent data connection " +
                                 sl.d_con.from.str() + " -> " + sl.d_con.to.str());

            if (++per_conn[{sl.d_con.from, sl.d_con.to}] > 1)
                error(where, "data connection " + sl.d_con.from.str() + " -> " + sl.d_con.to.str() +
                                 " carries more than one secure annotation");

            if (sl.goal == SecGoal::Confidentiality && sl.alg == "AES") {
                auto bits = sl.keysize_bits();
                if (!bits || (*bits != 128 && *bits != 192 && *bits != 256))
                    error(where, "AES keysize must be one of 128, 192, 256");
            }
            if (auto rekey = sl.rekey_ms(); rekey && *rekey == 0)
                error(where, "rekey interval must be positive");
        }
    }

    const Application& app_;
    std::vector<Diagnostic> diags_;
};

}  // namespace

std::vector<Diagnostic> validate_application(const Application& app) {
    return Validator(app).run();
}

std::vector<DataConn> cross_device_connections(const Application& app) {
    auto device_of = [&](const std::string& instance) -> const std::string& {
        auto it = app.mapping.find(instance);
        if (it == app.mapping.end())
            throw CrossDeviceError("instance '" + instance + "' is not mapped to a device");
        return it->second;
    };

    std::vector<DataConn> out;
    for (const auto& conn : app.root.data_conns) {
        if (device_of(conn.from.instance) != device_of(conn.to.instance)) out.push_back(conn);
    }
    return out;
}

}  // namespace fbsec
