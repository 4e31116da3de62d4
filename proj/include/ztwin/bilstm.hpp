#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ztwin/errors.hpp"
#include "ztwin/rng.hpp"
#include "ztwin/traffic.hpp"

namespace ztwin::predictor {

struct TrainConfig {
    int epochs = 40;
    double learning_rate = 1e-3;
    int batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (epochs < 1) throw ParameterError("train.epochs must be >= 1");
        if (learning_rate <= 0.0) throw ParameterError("train.learning_rate must be > 0");
        if (batch_size < 1) throw ParameterError("train.batch_size must be >= 1");
        if (beta1 <= 0.0 || beta1 >= 1.0) throw ParameterError("train.beta1 must be in (0,1)");
        if (beta2 <= 0.0 || beta2 >= 1.0) throw ParameterError("train.beta2 must be in (0,1)");
        if (epsilon <= 0.0) throw ParameterError("train.epsilon must be > 0");
    }
};

// One-feature bidirectional LSTM regressor.  Each direction runs standard
// LSTM cells (sigmoid gates, tanh candidates); the two final hidden states
// are concatenated, passed through ReLU, and reduced by a dense layer to a
// single value.  Parameters live in one flat vector so the optimizer and the
// gradient checker can treat the model as a plain R^n -> R function.
//
// Flat layout, per direction (forward then backward), gates ordered
// input/forget/candidate/output: Wx[H] | U[H*H] row-major | b[H] per gate;
// then dense w[2H] | dense b.
class BiLstmModel {
public:
    int hidden = 0;
    int L = 0;
    std::vector<double> params;

    static std::size_t direction_size(int hidden) {
        auto h = static_cast<std::size_t>(hidden);
        return 4 * (h + h * h + h);
    }

    static std::size_t total_params(int hidden) {
        auto h = static_cast<std::size_t>(hidden);
        return 2 * direction_size(hidden) + 2 * h + 1;
    }

    static BiLstmModel init(int hidden, int L, std::uint64_t seed) {
        if (hidden < 1) throw ParameterError("model.hidden must be >= 1");
        if (L < 1) throw ParameterError("model.window must be >= 1");
        BiLstmModel m;
        m.hidden = hidden;
        m.L = L;
        m.params.resize(total_params(hidden));
        const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
        Rng rng(seed);
        for (double& p : m.params) p = uniform_real(rng, -k, k);
        return m;
    }

    int dense_inputs() const { return 2 * hidden; }

    // Offsets into the flat vector.  gate in [0,4): i, f, g, o.
    std::size_t wx_at(int dir, int gate) const {
        auto h = static_cast<std::size_t>(hidden);
        return static_cast<std::size_t>(dir) * direction_size(hidden) +
               static_cast<std::size_t>(gate) * (h + h * h + h);
    }
    std::size_t u_at(int dir, int gate) const { return wx_at(dir, gate) + static_cast<std::size_t>(hidden); }
    std::size_t b_at(int dir, int gate) const {
        auto h = static_cast<std::size_t>(hidden);
        return wx_at(dir, gate) + h + h * h;
    }
    std::size_t dense_w_at() const { return 2 * direction_size(hidden); }
    std::size_t dense_b_at() const { return dense_w_at() + static_cast<std::size_t>(2 * hidden); }

    double forward(const std::vector<double>& x) const;
};

namespace detail {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Per-window activations kept for backpropagation.  Buffers are reused
// across windows; size is fixed by (hidden, L).
struct Workspace {
    int hidden = 0;
    int L = 0;
    // Per direction, per timestep: gate activations and cell states.
    // Layout: dir * L * H + t * H + j.
    std::vector<double> gi, gf, gg, go, c, tanh_c;
    // Hidden states, one extra row for the initial zeros: dir * (L+1) * H.
    std::vector<double> h;
    std::vector<double> relu_in;  // 2H concat before ReLU
    std::vector<double> dh, dc, dh_next, dzi, dzf, dzg, dzo;

    void resize(int hidden_, int L_) {
        hidden = hidden_;
        L = L_;
        auto n = static_cast<std::size_t>(2) * L * hidden;
        gi.resize(n); gf.resize(n); gg.resize(n); go.resize(n);
        c.resize(n); tanh_c.resize(n);
        h.assign(static_cast<std::size_t>(2) * (L + 1) * hidden, 0.0);
        relu_in.resize(static_cast<std::size_t>(2) * hidden);
        dh.resize(hidden); dc.resize(hidden); dh_next.resize(hidden);
        dzi.resize(hidden); dzf.resize(hidden); dzg.resize(hidden); dzo.resize(hidden);
    }
};

// Runs both directions and the dense head; fills the workspace caches.
inline double forward_cached(const BiLstmModel& m, const std::vector<double>& x, Workspace& ws) {
    const int H = m.hidden;
    const int L = m.L;
    if (x.size() != static_cast<std::size_t>(L)) {
        throw ShapeError("window length does not match the model");
    }
    const double* P = m.params.data();
    for (int dir = 0; dir < 2; ++dir) {
        const double* wxi = P + m.wx_at(dir, 0);
        const double* wxf = P + m.wx_at(dir, 1);
        const double* wxg = P + m.wx_at(dir, 2);
        const double* wxo = P + m.wx_at(dir, 3);
        const double* ui = P + m.u_at(dir, 0);
        const double* uf = P + m.u_at(dir, 1);
        const double* ug = P + m.u_at(dir, 2);
        const double* uo = P + m.u_at(dir, 3);
        const double* bi = P + m.b_at(dir, 0);
        const double* bf = P + m.b_at(dir, 1);
        const double* bg = P + m.b_at(dir, 2);
        const double* bo = P + m.b_at(dir, 3);
        const std::size_t step_base = static_cast<std::size_t>(dir) * L * H;
        const std::size_t h_base = static_cast<std::size_t>(dir) * (L + 1) * H;
        for (int j = 0; j < H; ++j) ws.h[h_base + static_cast<std::size_t>(j)] = 0.0;
        for (int t = 0; t < L; ++t) {
            // The backward direction reads the window right to left.
            const double xt = (dir == 0) ? x[static_cast<std::size_t>(t)]
                                         : x[static_cast<std::size_t>(L - 1 - t)];
            const double* h_prev = ws.h.data() + h_base + static_cast<std::size_t>(t) * H;
            double* h_cur = ws.h.data() + h_base + static_cast<std::size_t>(t + 1) * H;
            const std::size_t at = step_base + static_cast<std::size_t>(t) * H;
            for (int j = 0; j < H; ++j) {
                const std::size_t row = static_cast<std::size_t>(j) * H;
                double zi = wxi[j] * xt + bi[j];
                double zf = wxf[j] * xt + bf[j];
                double zg = wxg[j] * xt + bg[j];
                double zo = wxo[j] * xt + bo[j];
                const double* uij = ui + row;
                const double* ufj = uf + row;
                const double* ugj = ug + row;
                const double* uoj = uo + row;
                for (int k = 0; k < H; ++k) {
                    const double hk = h_prev[k];
                    zi += uij[k] * hk;
                    zf += ufj[k] * hk;
                    zg += ugj[k] * hk;
                    zo += uoj[k] * hk;
                }
                const double iv = sigmoid(zi);
                const double fv = sigmoid(zf);
                const double gv = std::tanh(zg);
                const double ov = sigmoid(zo);
                const double c_prev = (t == 0) ? 0.0 : ws.c[at - static_cast<std::size_t>(H) + j];
                const double cv = fv * c_prev + iv * gv;
                const double tc = std::tanh(cv);
                ws.gi[at + j] = iv;
                ws.gf[at + j] = fv;
                ws.gg[at + j] = gv;
                ws.go[at + j] = ov;
                ws.c[at + j] = cv;
                ws.tanh_c[at + j] = tc;
                h_cur[j] = ov * tc;
            }
        }
    }
    const double* dw = P + m.dense_w_at();
    double y = P[m.dense_b_at()];
    for (int dir = 0; dir < 2; ++dir) {
        const double* h_final =
            ws.h.data() + static_cast<std::size_t>(dir) * (L + 1) * H + static_cast<std::size_t>(L) * H;
        for (int j = 0; j < H; ++j) {
            const double z = h_final[j];
            ws.relu_in[static_cast<std::size_t>(dir) * H + j] = z;
            y += dw[dir * H + j] * (z > 0.0 ? z : 0.0);
        }
    }
    return y;
}

// Accumulates dLoss/dparams into grad for one window, given dLoss/dy.
inline void backward_into(const BiLstmModel& m, const std::vector<double>& x, Workspace& ws,
                          double dy, std::vector<double>& grad) {
    const int H = m.hidden;
    const int L = m.L;
    const double* P = m.params.data();
    double* G = grad.data();
    // Dense head and ReLU.
    const double* dw = P + m.dense_w_at();
    G[m.dense_b_at()] += dy;
    for (int dir = 0; dir < 2; ++dir) {
        for (int j = 0; j < H; ++j) {
            const double z = ws.relu_in[static_cast<std::size_t>(dir) * H + j];
            const double r = z > 0.0 ? z : 0.0;
            G[m.dense_w_at() + static_cast<std::size_t>(dir) * H + j] += dy * r;
        }
    }
    for (int dir = 0; dir < 2; ++dir) {
        const double* ui = P + m.u_at(dir, 0);
        const double* uf = P + m.u_at(dir, 1);
        const double* ug = P + m.u_at(dir, 2);
        const double* uo = P + m.u_at(dir, 3);
        double* gwxi = G + m.wx_at(dir, 0);
        double* gwxf = G + m.wx_at(dir, 1);
        double* gwxg = G + m.wx_at(dir, 2);
        double* gwxo = G + m.wx_at(dir, 3);
        double* gui = G + m.u_at(dir, 0);
        double* guf = G + m.u_at(dir, 1);
        double* gug = G + m.u_at(dir, 2);
        double* guo = G + m.u_at(dir, 3);
        double* gbi = G + m.b_at(dir, 0);
        double* gbf = G + m.b_at(dir, 1);
        double* gbg = G + m.b_at(dir, 2);
        double* gbo = G + m.b_at(dir, 3);
        const std::size_t step_base = static_cast<std::size_t>(dir) * L * H;
        const std::size_t h_base = static_cast<std::size_t>(dir) * (L + 1) * H;
        // Seed dh with the dense gradient routed through the ReLU.
        for (int j = 0; j < H; ++j) {
            const double z = ws.relu_in[static_cast<std::size_t>(dir) * H + j];
            ws.dh[j] = (z > 0.0) ? dy * dw[dir * H + j] : 0.0;
            ws.dc[j] = 0.0;
        }
        for (int t = L - 1; t >= 0; --t) {
            const double xt = (dir == 0) ? x[static_cast<std::size_t>(t)]
                                         : x[static_cast<std::size_t>(L - 1 - t)];
            const std::size_t at = step_base + static_cast<std::size_t>(t) * H;
            const double* h_prev = ws.h.data() + h_base + static_cast<std::size_t>(t) * H;
            for (int j = 0; j < H; ++j) {
                const double iv = ws.gi[at + j];
                const double fv = ws.gf[at + j];
                const double gv = ws.gg[at + j];
                const double ov = ws.go[at + j];
                const double tc = ws.tanh_c[at + j];
                const double c_prev = (t == 0) ? 0.0 : ws.c[at - static_cast<std::size_t>(H) + j];
                const double dct = ws.dh[j] * ov * (1.0 - tc * tc) + ws.dc[j];
                const double dov = ws.dh[j] * tc;
                ws.dzi[j] = dct * gv * iv * (1.0 - iv);
                ws.dzf[j] = dct * c_prev * fv * (1.0 - fv);
                ws.dzg[j] = dct * iv * (1.0 - gv * gv);
                ws.dzo[j] = dov * ov * (1.0 - ov);
                ws.dc[j] = dct * fv;
            }
            for (int j = 0; j < H; ++j) {
                const std::size_t row = static_cast<std::size_t>(j) * H;
                const double di = ws.dzi[j];
                const double df = ws.dzf[j];
                const double dg = ws.dzg[j];
                const double dzo = ws.dzo[j];
                gwxi[j] += di * xt;
                gwxf[j] += df * xt;
                gwxg[j] += dg * xt;
                gwxo[j] += dzo * xt;
                gbi[j] += di;
                gbf[j] += df;
                gbg[j] += dg;
                gbo[j] += dzo;
                double* guij = gui + row;
                double* gufj = guf + row;
                double* gugj = gug + row;
                double* guoj = guo + row;
                for (int k = 0; k < H; ++k) {
                    const double hk = h_prev[k];
                    guij[k] += di * hk;
                    gufj[k] += df * hk;
                    gugj[k] += dg * hk;
                    guoj[k] += dzo * hk;
                }
            }
            for (int k = 0; k < H; ++k) {
                double acc = 0.0;
                for (int j = 0; j < H; ++j) {
                    const std::size_t row = static_cast<std::size_t>(j) * H + k;
                    acc += ui[row] * ws.dzi[j];
                    acc += uf[row] * ws.dzf[j];
                    acc += ug[row] * ws.dzg[j];
                    acc += uo[row] * ws.dzo[j];
                }
                ws.dh_next[k] = acc;
            }
            std::swap(ws.dh, ws.dh_next);
        }
    }
}

} // namespace detail

inline double BiLstmModel::forward(const std::vector<double>& x) const {
    detail::Workspace ws;
    ws.resize(hidden, L);
    return detail::forward_cached(*this, x, ws);
}

// Mean squared error over windows [first, first + count) and its gradient.
// grad must already have params size; it is overwritten.
inline double loss_and_gradient(const BiLstmModel& m, const traffic::WindowSet& windows,
                                std::size_t first, std::size_t count, std::vector<double>& grad) {
    if (count == 0 || first + count > windows.items.size()) {
        throw InsufficientData("empty window slice");
    }
    grad.assign(m.params.size(), 0.0);
    detail::Workspace ws;
    ws.resize(m.hidden, m.L);
    double loss = 0.0;
    for (std::size_t i = first; i < first + count; ++i) {
        const auto& w = windows.items[i];
        const double y = detail::forward_cached(m, w.input, ws);
        const double err = y - w.target;
        loss += err * err;
        detail::backward_into(m, w.input, ws, 2.0 * err / static_cast<double>(count), grad);
    }
    return loss / static_cast<double>(count);
}

// Loss without gradients; shares the forward path with training so the
// finite-difference check probes exactly the trained function.
inline double loss_only(const BiLstmModel& m, const traffic::WindowSet& windows,
                        std::size_t first, std::size_t count) {
    if (count == 0 || first + count > windows.items.size()) {
        throw InsufficientData("empty window slice");
    }
    detail::Workspace ws;
    ws.resize(m.hidden, m.L);
    double loss = 0.0;
    for (std::size_t i = first; i < first + count; ++i) {
        const auto& w = windows.items[i];
        const double err = detail::forward_cached(m, w.input, ws) - w.target;
        loss += err * err;
    }
    return loss / static_cast<double>(count);
}

// Adam over fixed-order minibatches.  Returns mean training MSE per epoch,
// measured on the predictions made before each batch update.
inline std::vector<double> train(BiLstmModel& m, const traffic::WindowSet& windows,
                                 const TrainConfig& cfg) {
    cfg.validate();
    if (windows.items.empty()) throw InsufficientData("no training windows");
    if (windows.L != m.L) throw ShapeError("window length does not match the model");
    const std::size_t n = windows.items.size();
    std::vector<double> grad(m.params.size());
    std::vector<double> mom(m.params.size(), 0.0);
    std::vector<double> vel(m.params.size(), 0.0);
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t first = 0; first < n; first += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count = std::min(static_cast<std::size_t>(cfg.batch_size), n - first);
            const double batch_loss = loss_and_gradient(m, windows, first, count, grad);
            epoch_loss += batch_loss * static_cast<double>(count);
            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t p = 0; p < m.params.size(); ++p) {
                mom[p] = cfg.beta1 * mom[p] + (1.0 - cfg.beta1) * grad[p];
                vel[p] = cfg.beta2 * vel[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
                const double mhat = mom[p] / bc1;
                const double vhat = vel[p] / bc2;
                m.params[p] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
            }
        }
        history.push_back(epoch_loss / static_cast<double>(n));
    }
    return history;
}

} // namespace ztwin::predictor
