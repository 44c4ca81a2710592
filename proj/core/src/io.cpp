#include "survband/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "survband/errors.hpp"

namespace survband {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

template <typename Vec>
json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Eigen::VectorXd json_to_vec(const json& a) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r)));
    return rows;
}

Eigen::MatrixXd json_to_mat(const json& rows, std::size_t cols_if_empty) {
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(nr ? rows[0].size() : cols_if_empty);
    Eigen::MatrixXd m(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != nc) throw SchemaError("ragged weight matrix in checkpoint");
        for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

json scale_to_json(const ColumnScale& s) { return json{{"mean", s.mean}, {"sd", s.sd}}; }
ColumnScale json_to_scale(const json& j) { return {j.at("mean").get<double>(), j.at("sd").get<double>()}; }

json standardization_to_json(const Standardization& s) {
    json f = json::array();
    for (const auto& c : s.features) f.push_back(scale_to_json(c));
    return json{{"features", f}, {"time", scale_to_json(s.time)}};
}

Standardization json_to_standardization(const json& j) {
    Standardization s;
    for (const auto& c : j.at("features")) s.features.push_back(json_to_scale(c));
    s.time = json_to_scale(j.at("time"));
    return s;
}

json net_to_json(const HazardNet& net) {
    json layers = json::array();
    for (const auto& h : net.hidden()) {
        json l{{"weight", mat_to_json(h.weight)}, {"bias", vec_to_json(h.bias)}};
        if (net.batch_norm()) {
            l["gamma"] = vec_to_json(h.gamma);
            l["beta"] = vec_to_json(h.beta);
            l["running_mean"] = vec_to_json(h.running_mean);
            l["running_var"] = vec_to_json(h.running_var);
        }
        layers.push_back(std::move(l));
    }
    return json{{"input_dim", net.input_dim()},
                {"batch_norm", net.batch_norm()},
                {"dropout_rate", net.dropout_rate()},
                {"hidden", layers},
                {"output", {{"weight", vec_to_json(net.output().weight)}, {"bias", net.output().bias}}},
                {"scaling", standardization_to_json(net.scaling())}};
}

HazardNet json_to_net(const json& j) {
    const bool bn = j.at("batch_norm").get<bool>();
    std::size_t in = j.at("input_dim").get<std::size_t>();
    std::vector<HiddenLayer> hidden;
    for (const auto& l : j.at("hidden")) {
        HiddenLayer h;
        h.weight = json_to_mat(l.at("weight"), in);
        h.bias = json_to_vec(l.at("bias"));
        if (bn) {
            h.gamma = json_to_vec(l.at("gamma"));
            h.beta = json_to_vec(l.at("beta"));
            h.running_mean = json_to_vec(l.at("running_mean"));
            h.running_var = json_to_vec(l.at("running_var"));
        }
        in = static_cast<std::size_t>(h.weight.rows());
        hidden.push_back(std::move(h));
    }
    OutputLayer out;
    out.weight = json_to_vec(j.at("output").at("weight")).transpose();
    out.bias = j.at("output").at("bias").get<double>();
    return HazardNet(std::move(hidden), std::move(out), j.at("dropout_rate").get<double>(), bn,
                     json_to_standardization(j.at("scaling")));
}

json baseline_to_json(const BreslowBaseline& b) {
    return json{{"event_times", b.event_times}, {"increments", b.increments}};
}

BreslowBaseline json_to_baseline(const json& j) {
    BreslowBaseline b;
    b.event_times = j.at("event_times").get<std::vector<double>>();
    b.increments = j.at("increments").get<std::vector<double>>();
    if (b.event_times.size() != b.increments.size() || b.event_times.empty())
        throw SchemaError("baseline needs matching, non-empty event_times and increments");
    return b;
}

json parse_json(std::istream& in, const char* what) {
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("malformed ") + what + ": " + e.what());
    }
}

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid ") + what + ": " + e.what());
    }
}

std::string g17(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

}  // namespace

void save_net(std::ostream& out, const HazardNet& net) {
    out << json{{"format", "survband-net"}, {"version", kFormatVersion}, {"net", net_to_json(net)}}.dump() << '\n';
}

HazardNet load_net(std::istream& in) {
    const json j = parse_json(in, "network file");
    return guarded("network file", [&] { return json_to_net(j.at("net")); });
}

void save_baseline(std::ostream& out, const BreslowBaseline& baseline) {
    out << baseline_to_json(baseline).dump() << '\n';
}

BreslowBaseline load_baseline(std::istream& in) {
    const json j = parse_json(in, "baseline file");
    return guarded("baseline file", [&] { return json_to_baseline(j); });
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    const auto& f = ckpt.fit;
    if (!f.base.net || f.members.empty()) throw ContractError("checkpoint needs the base and member networks");
    json members = json::array();
    for (const auto& m : f.members) members.push_back(net_to_json(*m));
    json boot = json::array();
    for (const auto& b : f.bootstrap) {
        if (!b.net) throw ContractError("checkpoint needs every bootstrap network");
        boot.push_back(json{{"net", net_to_json(*b.net)}, {"baseline", baseline_to_json(b.baseline)}});
    }
    // The base network is stored by index when it is ensemble member 0.
    json base{{"baseline", baseline_to_json(f.base.baseline)}};
    if (f.base.net == f.members.front()) base["member"] = 0;
    else base["net"] = net_to_json(*f.base.net);

    const json j{{"format", "survband-checkpoint"},
                 {"version", kFormatVersion},
                 {"feature_names", ckpt.feature_names},
                 {"standardization", standardization_to_json(ckpt.standardization)},
                 {"tau", f.tau},
                 {"training_runs", f.training_runs},
                 {"base", base},
                 {"members", members},
                 {"center_baseline", baseline_to_json(f.center_baseline)},
                 {"bootstrap", boot}};
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(std::istream& in) {
    const json j = parse_json(in, "checkpoint");
    return guarded("checkpoint", [&] {
        if (j.at("format").get<std::string>() != "survband-checkpoint") throw SchemaError("not a survband checkpoint");
        if (j.at("version").get<int>() != kFormatVersion) throw SchemaError("unsupported checkpoint version");
        Checkpoint c;
        c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        c.standardization = json_to_standardization(j.at("standardization"));
        auto& f = c.fit;
        f.tau = j.at("tau").get<double>();
        f.training_runs = j.at("training_runs").get<std::size_t>();
        std::vector<GFunctionPtr> gs;
        for (const auto& m : j.at("members")) {
            f.members.push_back(std::make_shared<const HazardNet>(json_to_net(m)));
            gs.push_back(net_g(f.members.back()));
        }
        if (f.members.empty()) throw SchemaError("checkpoint has no ensemble members");
        const auto& base = j.at("base");
        if (base.contains("member")) {
            f.base.net = f.members.at(base.at("member").get<std::size_t>());
            f.base.g = gs.at(base.at("member").get<std::size_t>());
        } else {
            f.base.net = std::make_shared<const HazardNet>(json_to_net(base.at("net")));
            f.base.g = net_g(f.base.net);
        }
        f.base.baseline = json_to_baseline(base.at("baseline"));
        f.center_g = ensemble_g(std::move(gs));
        f.center_baseline = json_to_baseline(j.at("center_baseline"));
        for (const auto& b : j.at("bootstrap")) {
            FittedModel m;
            m.net = std::make_shared<const HazardNet>(json_to_net(b.at("net")));
            m.g = net_g(m.net);
            m.baseline = json_to_baseline(b.at("baseline"));
            f.bootstrap.push_back(std::move(m));
        }
        return c;
    });
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    save_checkpoint(out, ckpt);
    if (!out) throw Error("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return load_checkpoint(in);
}

void write_curve_csv(std::ostream& out, const SurvCurve& curve) {
    std::ostringstream s;
    s << "t,S\n";
    for (std::size_t k = 0; k < curve.size(); ++k) s << g17(curve.grid()[k]) << ',' << g17(curve[k]) << '\n';
    out << s.str();
}

void write_band_csv(std::ostream& out, const BandResult& band) {
    std::ostringstream s;
    s << "t,lower,base,upper\n";
    for (std::size_t k = 0; k < band.grid.size(); ++k)
        s << g17(band.grid[k]) << ',' << g17(band.lower[k]) << ',' << g17(band.base[k]) << ','
          << g17(band.upper[k]) << '\n';
    out << s.str();
}

void write_band_svg(std::ostream& out, const BandResult& band, const SurvCurve* reference,
                    const std::string& title) {
    constexpr double W = 640, H = 400, L = 50, R = 20, T = 30, Bm = 40;
    const double t0 = 0.0, t1 = band.grid.tau();
    auto px = [&](double t) { return L + (t - t0) / (t1 - t0) * (W - L - R); };
    auto py = [&](double s) { return T + (1.0 - s) * (H - T - Bm); };
    auto polyline = [&](const std::vector<double>& ys) {
        std::ostringstream p;
        p << std::fixed << std::setprecision(2);
        for (std::size_t k = 0; k < ys.size(); ++k) p << (k ? " " : "") << px(band.grid[k]) << ',' << py(ys[k]);
        return p.str();
    };

    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << py(0) << "\" x2=\"" << W - R << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << py(0) << "\" x2=\"" << L << "\" y2=\"" << py(1)
      << "\" stroke=\"black\"/>\n";
    for (double tick : {0.0, 0.5, 1.0})
        s << "<text x=\"" << L - 8 << "\" y=\"" << py(tick) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
          << tick << "</text>\n";
    s << "<text x=\"" << W - R << "\" y=\"" << H - 12 << "\" font-size=\"11\" text-anchor=\"end\">t = " << t1
      << "</text>\n";

    std::ostringstream area;
    area << polyline(band.upper);
    {
        std::ostringstream back;
        back << std::fixed << std::setprecision(2);
        for (std::size_t k = band.grid.size(); k-- > 0;) back << ' ' << px(band.grid[k]) << ',' << py(band.lower[k]);
        area << back.str();
    }
    s << "<polygon points=\"" << area.str() << "\" fill=\"steelblue\" fill-opacity=\"0.3\" stroke=\"none\"/>\n";
    s << "<polyline points=\"" << polyline(band.base) << "\" fill=\"none\" stroke=\"steelblue\"/>\n";
    if (reference) {
        std::vector<double> ref(reference->values().begin(), reference->values().end());
        s << "<polyline points=\"" << polyline(ref) << "\" fill=\"none\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    }
    const std::string heading = title.empty() ? std::string(to_string(band.method)) : title;
    s << "<text x=\"" << L << "\" y=\"18\" font-size=\"13\">" << heading << " " << std::setprecision(0)
      << band.level * 100 << "%</text>\n";
    s << "</svg>\n";
    out << s.str();
}

void write_simulation_meta(std::ostream& out, const SimulationMeta& meta) {
    std::ostringstream s;
    s << "setting=" << meta.setting << '\n'
      << "seed=" << meta.seed << '\n'
      << "n=" << meta.n << '\n'
      << "events=" << meta.events << '\n'
      << "censoring_fraction=" << g17(meta.censoring_fraction) << '\n';
    out << s.str();
}

SimulationMeta read_simulation_meta(std::istream& in) {
    SimulationMeta m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("sidecar line without '=': " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        std::istringstream v(value);
        if (key == "setting") v >> m.setting;
        else if (key == "seed") v >> m.seed;
        else if (key == "n") v >> m.n;
        else if (key == "events") v >> m.events;
        else if (key == "censoring_fraction") v >> m.censoring_fraction;
        else throw ConfigError("unknown sidecar key: " + key);
        if (v.fail()) throw ConfigError("bad value for " + key + ": " + value);
    }
    return m;
}

}  // namespace survband
