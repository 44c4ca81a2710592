#include "survband/hazardnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "survband/errors.hpp"

namespace survband {

namespace {

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    unsigned long long out = 0;
    try {
        if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
        out = std::stoull(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("invalid value for '" + key + "': " + v);
    }
    if (pos != v.size()) throw ConfigError("invalid value for '" + key + "': " + v);
    return static_cast<std::size_t>(out);
}

double parse_real(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError("invalid value for '" + key + "': " + v);
    }
    if (pos != v.size()) throw ConfigError("invalid value for '" + key + "': " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("invalid value for '" + key + "': " + v);
}

}  // namespace

void NetConfig::validate() const {
    if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
    if (layer_width < 1) throw ConfigError("layer_width must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (n_controls < 1) throw ConfigError("n_controls must be >= 1");
}

NetConfig parse_net_config(std::istream& in, NetConfig cfg) {
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + line + "'");
        const std::string key = strip(line.substr(0, eq));
        const std::string val = strip(line.substr(eq + 1));
        if (key == "hidden_layers") cfg.hidden_layers = parse_count(key, val);
        else if (key == "layer_width") cfg.layer_width = parse_count(key, val);
        else if (key == "dropout_rate") cfg.dropout_rate = parse_real(key, val);
        else if (key == "learning_rate") cfg.learning_rate = parse_real(key, val);
        else if (key == "batch_size") cfg.batch_size = parse_count(key, val);
        else if (key == "max_epochs") cfg.max_epochs = parse_count(key, val);
        else if (key == "patience") cfg.patience = parse_count(key, val);
        else if (key == "n_controls") cfg.n_controls = parse_count(key, val);
        else if (key == "seed") cfg.seed = parse_count(key, val);
        else if (key == "batch_norm") cfg.batch_norm = parse_bool(key, val);
        else throw ConfigError("unknown configuration key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

NetConfig load_net_config(const std::string& path, NetConfig defaults) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_net_config(in, defaults);
}

void write_net_config(std::ostream& out, const NetConfig& cfg) {
    std::ostringstream s;
    s.precision(17);
    s << "hidden_layers=" << cfg.hidden_layers << '\n'
      << "layer_width=" << cfg.layer_width << '\n'
      << "dropout_rate=" << cfg.dropout_rate << '\n'
      << "learning_rate=" << cfg.learning_rate << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "max_epochs=" << cfg.max_epochs << '\n'
      << "patience=" << cfg.patience << '\n'
      << "n_controls=" << cfg.n_controls << '\n'
      << "seed=" << cfg.seed << '\n'
      << "batch_norm=" << (cfg.batch_norm ? "true" : "false") << '\n';
    out << s.str();
}

// ---------------------------------------------------------------------------
// HazardNet

HazardNet::HazardNet(std::vector<HiddenLayer> hidden, OutputLayer output, double dropout_rate,
                     bool batch_norm, Standardization scaling)
    : hidden_(std::move(hidden)),
      output_(std::move(output)),
      dropout_rate_(dropout_rate),
      batch_norm_(batch_norm),
      scaling_(std::move(scaling)) {
    if (hidden_.empty()) throw ContractError("a hazard net needs at least one hidden layer");
    Eigen::Index in = hidden_.front().weight.cols();
    for (const auto& l : hidden_) {
        const auto out = l.weight.rows();
        if (l.weight.cols() != in || l.bias.size() != out)
            throw ContractError("inconsistent hidden layer shapes");
        if (batch_norm_ && (l.gamma.size() != out || l.beta.size() != out || l.running_mean.size() != out ||
                            l.running_var.size() != out))
            throw ContractError("inconsistent normalization parameter shapes");
        in = out;
    }
    if (output_.weight.size() != in) throw ContractError("output layer width mismatch");
    if (!(dropout_rate_ >= 0.0 && dropout_rate_ < 1.0)) throw ContractError("dropout rate must lie in [0, 1)");
}

HazardNet HazardNet::init(const NetConfig& cfg, std::size_t input_dim, Rng& rng) {
    cfg.validate();
    if (input_dim < 1) throw ContractError("input dimension must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto kaiming = [&](Eigen::Index rows, Eigen::Index cols) {
        const double sd = std::sqrt(2.0 / static_cast<double>(cols));
        Eigen::MatrixXd w(rows, cols);
        // Fill row by row so the draw order does not depend on storage order.
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = sd * normal(rng);
        return w;
    };

    const auto width = static_cast<Eigen::Index>(cfg.layer_width);
    std::vector<HiddenLayer> hidden;
    Eigen::Index in = static_cast<Eigen::Index>(input_dim);
    for (std::size_t l = 0; l < cfg.hidden_layers; ++l) {
        HiddenLayer layer;
        layer.weight = kaiming(width, in);
        layer.bias = Eigen::VectorXd::Zero(width);
        if (cfg.batch_norm) {
            layer.gamma = Eigen::VectorXd::Ones(width);
            layer.beta = Eigen::VectorXd::Zero(width);
            layer.running_mean = Eigen::VectorXd::Zero(width);
            layer.running_var = Eigen::VectorXd::Ones(width);
        }
        hidden.push_back(std::move(layer));
        in = width;
    }
    OutputLayer out;
    out.weight = kaiming(1, in);
    out.bias = 0.0;
    return HazardNet(std::move(hidden), std::move(out), cfg.dropout_rate, cfg.batch_norm);
}

std::size_t HazardNet::input_dim() const noexcept {
    return hidden_.empty() ? 0 : static_cast<std::size_t>(hidden_.front().weight.cols());
}

Eigen::RowVectorXd HazardNet::forward(const Eigen::MatrixXd& inputs, Mode mode, Rng* rng,
                                      ForwardCache* cache) const {
    if (static_cast<std::size_t>(inputs.rows()) != input_dim())
        throw ContractError("input has " + std::to_string(inputs.rows()) + " rows, net expects " +
                            std::to_string(input_dim()));
    const bool use_dropout = mode == Mode::train && dropout_rate_ > 0.0;
    if (use_dropout && rng == nullptr) throw ContractError("train-mode dropout needs a random stream");
    const Eigen::Index n = inputs.cols();

    if (cache) {
        cache->mode = mode;
        cache->layers.assign(hidden_.size(), {});
    }

    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const auto& layer = hidden_[l];
        Eigen::MatrixXd pre = layer.weight * a;
        pre.colwise() += layer.bias;
        Eigen::MatrixXd rect = pre.cwiseMax(0.0);
        Eigen::MatrixXd y;
        Eigen::MatrixXd normed;
        Eigen::VectorXd mean, var, inv_std;
        if (batch_norm_) {
            if (mode == Mode::train) {
                mean = rect.rowwise().mean();
                var = (rect.colwise() - mean).array().square().rowwise().mean().matrix();
            } else {
                mean = layer.running_mean;
                var = layer.running_var;
            }
            inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
            normed = ((rect.colwise() - mean).array().colwise() * inv_std.array()).matrix();
            y = ((normed.array().colwise() * layer.gamma.array()).colwise() + layer.beta.array()).matrix();
        } else {
            y = rect;
        }
        Eigen::MatrixXd mask;
        if (use_dropout) {
            const double keep = 1.0 - dropout_rate_;
            std::bernoulli_distribution draw(keep);
            mask.resize(y.rows(), n);
            for (Eigen::Index c = 0; c < n; ++c)
                for (Eigen::Index r = 0; r < y.rows(); ++r) mask(r, c) = draw(*rng) ? 1.0 / keep : 0.0;
            y = y.cwiseProduct(mask);
        }
        if (cache) {
            auto& cl = cache->layers[l];
            cl.input = std::move(a);
            cl.pre = std::move(pre);
            cl.rect = std::move(rect);
            cl.normed = std::move(normed);
            cl.mean = std::move(mean);
            cl.var = std::move(var);
            cl.inv_std = std::move(inv_std);
            cl.mask = std::move(mask);
        }
        a = std::move(y);
    }
    Eigen::RowVectorXd out = output_.weight * a;
    out.array() += output_.bias;
    if (cache) cache->last = std::move(a);
    return out;
}

double HazardNet::forward(double t_std, std::span<const double> x, Mode mode, Rng* rng) const {
    if (x.size() + 1 != input_dim()) throw ContractError("covariate dimension mismatch");
    Eigen::MatrixXd in(static_cast<Eigen::Index>(input_dim()), 1);
    for (std::size_t j = 0; j < x.size(); ++j) in(static_cast<Eigen::Index>(j), 0) = x[j];
    in(static_cast<Eigen::Index>(x.size()), 0) = t_std;
    return forward(in, mode, rng)(0);
}

double HazardNet::g(double raw_t, std::span<const double> x_std) const {
    return forward(scaling_.transform_time(raw_t), x_std, Mode::infer);
}

Eigen::VectorXd HazardNet::backward(const ForwardCache& cache, const Eigen::RowVectorXd& d_out) const {
    if (cache.layers.size() != hidden_.size()) throw ContractError("forward cache does not match the net");
    if (d_out.size() != cache.last.cols()) throw ContractError("output gradient has the wrong length");
    Eigen::VectorXd grad(static_cast<Eigen::Index>(parameter_count()));

    // Offsets of each hidden layer's block inside the flat vector.
    std::vector<Eigen::Index> offset(hidden_.size() + 1, 0);
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const auto& h = hidden_[l];
        Eigen::Index size = h.weight.size() + h.bias.size();
        if (batch_norm_) size += h.gamma.size() + h.beta.size();
        offset[l + 1] = offset[l] + size;
    }
    const Eigen::Index out_off = offset.back();
    const Eigen::Index width_last = output_.weight.size();

    grad.segment(out_off, width_last) = (d_out * cache.last.transpose()).transpose();
    grad(out_off + width_last) = d_out.sum();

    Eigen::MatrixXd da = output_.weight.transpose() * d_out;
    for (std::size_t li = hidden_.size(); li-- > 0;) {
        const auto& layer = hidden_[li];
        const auto& cl = cache.layers[li];
        Eigen::MatrixXd dy = cl.mask.size() ? da.cwiseProduct(cl.mask) : da;
        Eigen::MatrixXd drect;
        Eigen::VectorXd dgamma, dbeta;
        if (batch_norm_) {
            dgamma = dy.cwiseProduct(cl.normed).rowwise().sum();
            dbeta = dy.rowwise().sum();
            Eigen::MatrixXd dnormed = (dy.array().colwise() * layer.gamma.array()).matrix();
            if (cache.mode == Mode::train) {
                const double n = static_cast<double>(dy.cols());
                Eigen::VectorXd sum_dn = dnormed.rowwise().sum();
                Eigen::VectorXd sum_dn_x = dnormed.cwiseProduct(cl.normed).rowwise().sum();
                Eigen::ArrayXXd t = n * dnormed.array();
                t.colwise() -= sum_dn.array();
                t -= cl.normed.array().colwise() * sum_dn_x.array();
                drect = (t.colwise() * (cl.inv_std.array() / n)).matrix();
            } else {
                drect = (dnormed.array().colwise() * cl.inv_std.array()).matrix();
            }
        } else {
            drect = std::move(dy);
        }
        Eigen::MatrixXd dpre = drect.cwiseProduct((cl.pre.array() > 0.0).cast<double>().matrix());
        Eigen::MatrixXd dW = dpre * cl.input.transpose();
        Eigen::VectorXd db = dpre.rowwise().sum();

        Eigen::Index pos = offset[li];
        grad.segment(pos, dW.size()) = Eigen::Map<const Eigen::VectorXd>(dW.data(), dW.size());
        pos += dW.size();
        grad.segment(pos, db.size()) = db;
        pos += db.size();
        if (batch_norm_) {
            grad.segment(pos, dgamma.size()) = dgamma;
            pos += dgamma.size();
            grad.segment(pos, dbeta.size()) = dbeta;
        }
        if (li > 0) da = layer.weight.transpose() * dpre;
    }
    return grad;
}

void HazardNet::update_running_stats(const ForwardCache& cache) {
    if (!batch_norm_ || cache.mode != Mode::train) return;
    const double m = kRunningMomentum;
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const auto& cl = cache.layers[l];
        const double n = static_cast<double>(cl.rect.cols());
        const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
        hidden_[l].running_mean = m * hidden_[l].running_mean + (1.0 - m) * cl.mean;
        hidden_[l].running_var = m * hidden_[l].running_var + (1.0 - m) * unbias * cl.var;
    }
}

std::size_t HazardNet::parameter_count() const noexcept {
    std::size_t count = 0;
    for (const auto& h : hidden_) {
        count += static_cast<std::size_t>(h.weight.size() + h.bias.size());
        if (batch_norm_) count += static_cast<std::size_t>(h.gamma.size() + h.beta.size());
    }
    return count + static_cast<std::size_t>(output_.weight.size()) + 1;
}

Eigen::VectorXd HazardNet::parameters() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    auto put = [&](const auto& m) {
        flat.segment(pos, m.size()) = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
        pos += m.size();
    };
    for (const auto& h : hidden_) {
        put(h.weight);
        put(h.bias);
        if (batch_norm_) {
            put(h.gamma);
            put(h.beta);
        }
    }
    put(output_.weight);
    flat(pos) = output_.bias;
    return flat;
}

void HazardNet::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        throw ContractError("parameter vector has the wrong length");
    Eigen::Index pos = 0;
    auto take = [&](auto& m) {
        Eigen::Map<Eigen::VectorXd>(m.data(), m.size()) = flat.segment(pos, m.size());
        pos += m.size();
    };
    for (auto& h : hidden_) {
        take(h.weight);
        take(h.bias);
        if (batch_norm_) {
            take(h.gamma);
            take(h.beta);
        }
    }
    take(output_.weight);
    output_.bias = flat(pos);
}

bool operator==(const HazardNet& a, const HazardNet& b) {
    if (a.hidden_.size() != b.hidden_.size() || a.batch_norm_ != b.batch_norm_ ||
        a.dropout_rate_ != b.dropout_rate_ || a.output_.bias != b.output_.bias ||
        a.output_.weight != b.output_.weight)
        return false;
    for (std::size_t l = 0; l < a.hidden_.size(); ++l) {
        const auto& x = a.hidden_[l];
        const auto& y = b.hidden_[l];
        if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols()) return false;
        if (x.weight != y.weight || x.bias != y.bias || x.gamma != y.gamma || x.beta != y.beta ||
            x.running_mean != y.running_mean || x.running_var != y.running_var)
            return false;
    }
    const auto& sa = a.scaling_;
    const auto& sb = b.scaling_;
    if (sa.features.size() != sb.features.size() || sa.time.mean != sb.time.mean || sa.time.sd != sb.time.sd)
        return false;
    for (std::size_t j = 0; j < sa.features.size(); ++j)
        if (sa.features[j].mean != sb.features[j].mean || sa.features[j].sd != sb.features[j].sd) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Case-control loss

double case_control_loss(std::span<const double> outputs, std::span<const std::size_t> offsets,
                         Eigen::RowVectorXd* d_outputs) {
    if (offsets.empty() || offsets.back() != outputs.size())
        throw ContractError("case-control offsets do not cover the outputs");
    const std::size_t events = offsets.size() - 1;
    if (d_outputs) d_outputs->setZero(static_cast<Eigen::Index>(outputs.size()));
    if (events == 0) return 0.0;
    const double inv_events = 1.0 / static_cast<double>(events);

    double total = 0.0;
    for (std::size_t e = 0; e < events; ++e) {
        const std::size_t begin = offsets[e];
        const std::size_t end = offsets[e + 1];
        if (end <= begin) throw ContractError("event without a case column");
        if (end - begin == 1) continue;  // no controls: log(1)
        const double case_g = outputs[begin];
        double shift = 0.0;  // the implicit "1" term has delta 0
        for (std::size_t j = begin + 1; j < end; ++j) shift = std::max(shift, outputs[j] - case_g);
        double sum = std::exp(-shift);
        for (std::size_t j = begin + 1; j < end; ++j) sum += std::exp(outputs[j] - case_g - shift);
        const double lse = shift + std::log(sum);
        total += lse;
        if (d_outputs) {
            double p_total = 0.0;
            for (std::size_t j = begin + 1; j < end; ++j) {
                const double p = std::exp(outputs[j] - case_g - lse);
                (*d_outputs)(static_cast<Eigen::Index>(j)) += p * inv_events;
                p_total += p;
            }
            (*d_outputs)(static_cast<Eigen::Index>(begin)) -= p_total * inv_events;
        }
    }
    return total * inv_events;
}

double ccl_loss(const HazardNet& net, const CaseControlBatch& batch, Mode mode, Rng* rng) {
    Eigen::RowVectorXd out = net.forward(batch.inputs, mode, rng);
    return case_control_loss(std::span<const double>(out.data(), static_cast<std::size_t>(out.size())),
                             batch.offsets);
}

LossGradient ccl_loss_gradient(const HazardNet& net, const CaseControlBatch& batch, Mode mode, Rng* rng,
                               ForwardCache* cache) {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    Eigen::RowVectorXd out = net.forward(batch.inputs, mode, rng, &c);
    Eigen::RowVectorXd d_out;
    LossGradient result;
    result.loss = case_control_loss(
        std::span<const double>(out.data(), static_cast<std::size_t>(out.size())), batch.offsets, &d_out);
    result.gradient = net.backward(c, d_out);
    return result;
}

// ---------------------------------------------------------------------------
// Risk sets

RiskSetSampler::RiskSetSampler(const Dataset& ds, std::span<const std::size_t> rows)
    : ds_(&ds), sorted_rows_(rows.begin(), rows.end()) {
    for (auto r : sorted_rows_)
        if (r >= ds.size()) throw ContractError("row index out of range");
    std::stable_sort(sorted_rows_.begin(), sorted_rows_.end(),
                     [&](std::size_t a, std::size_t b) { return ds[a].time < ds[b].time; });
    risk_begin_.resize(sorted_rows_.size());
    for (std::size_t p = 0; p < sorted_rows_.size(); ++p) {
        const double t = ds[sorted_rows_[p]].time;
        risk_begin_[p] = (p > 0 && ds[sorted_rows_[p - 1]].time == t) ? risk_begin_[p - 1] : p;
        if (ds[sorted_rows_[p]].event) event_positions_.push_back(p);
    }
}

CaseControlBatch RiskSetSampler::make_batch(std::span<const std::size_t> event_positions,
                                            std::size_t n_controls, Rng& rng) const {
    const Dataset& ds = *ds_;
    const auto d = static_cast<Eigen::Index>(ds.dim());
    const ColumnScale& ts = ds.standardization().time;

    CaseControlBatch batch;
    batch.offsets.reserve(event_positions.size() + 1);
    batch.rows.reserve(event_positions.size() * (n_controls + 1));
    for (auto p : event_positions) {
        if (p >= sorted_rows_.size()) throw ContractError("event position out of range");
        batch.rows.push_back(sorted_rows_[p]);
        const std::size_t candidates = sorted_rows_.size() - risk_begin_[p] - 1;
        if (candidates == 0) {
            ++batch.events_without_controls;
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, candidates - 1);
            for (std::size_t k = 0; k < n_controls; ++k) {
                std::size_t q = risk_begin_[p] + pick(rng);
                if (q >= p) ++q;  // skip the case itself
                batch.rows.push_back(sorted_rows_[q]);
            }
        }
        batch.offsets.push_back(batch.rows.size());
    }

    batch.inputs.resize(d + 1, static_cast<Eigen::Index>(batch.rows.size()));
    for (std::size_t e = 0; e + 1 < batch.offsets.size(); ++e) {
        const double t_std = ts.apply(ds[batch.rows[batch.offsets[e]]].time);
        for (std::size_t c = batch.offsets[e]; c < batch.offsets[e + 1]; ++c) {
            const auto& x = ds[batch.rows[c]].x;
            const auto col = static_cast<Eigen::Index>(c);
            for (Eigen::Index j = 0; j < d; ++j) batch.inputs(j, col) = x[static_cast<std::size_t>(j)];
            batch.inputs(d, col) = t_std;
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------

bool EarlyStopping::observe(double loss) {
    ++epoch_;
    if (epoch_ == 1 || loss < best_loss_) {
        best_loss_ = loss;
        best_epoch_ = epoch_;
        since_best_ = 0;
        improved_last_ = true;
        return false;
    }
    improved_last_ = false;
    ++since_best_;
    return since_best_ > patience_;
}

}  // namespace survband
