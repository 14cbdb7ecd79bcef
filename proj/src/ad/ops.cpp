#include "stdown/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdown::ad {

namespace {

void check_finite(const char* tag, const Tensor& t) {
    if (!finite_checks()) return;
    const double* p = t.data();
    for (std::int64_t i = 0; i < t.size(); ++i)
        if (!std::isfinite(p[i]))
            throw std::runtime_error(std::string("non-finite value produced by op '") + tag + "'");
}

using Backprop = std::function<void(const Tensor&, GradSink&)>;

Value make_op(const char* tag, Tensor out, std::vector<Value> parents, Backprop fn) {
    check_finite(tag, out);
    auto n = std::make_shared<Node>();
    n->value = std::move(out);
    n->tag = tag;
    bool needs = false;
    for (const auto& p : parents)
        if (p && p->requires_grad) needs = true;
    if (needs && grad_enabled()) {
        n->requires_grad = true;
        for (auto& p : parents)
            if (p) n->parents.push_back(std::move(p));
        n->backprop = std::move(fn);
    }
    return n;
}

void axpy(double a, const double* __restrict x, double* __restrict y, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Per-pixel accumulation scratch. Keeping the running sums in a local
// buffer (instead of the output tensor) lets the compiler keep them in
// vector registers across the kernel taps.
class AccBuf {
public:
    explicit AccBuf(std::int64_t n) : n_(n), buf_(static_cast<std::size_t>(n)) {}
    double* reset(const double* bias) {
        if (bias)
            for (std::int64_t i = 0; i < n_; ++i) buf_[static_cast<std::size_t>(i)] = bias[i];
        else
            std::fill(buf_.begin(), buf_.end(), 0.0);
        return buf_.data();
    }

private:
    std::int64_t n_;
    std::vector<double> buf_;
};

}  // namespace

// ---------------------------------------------------------------------------
// convolutions

Value conv2d(const Value& x, const Value& kernel, const Value& bias, int dil_h, int dil_w,
             Pad2d pad) {
    const Tensor& xv = x->value;
    const Tensor& kv = kernel->value;
    if (xv.rank() != 3)
        throw std::invalid_argument("conv2d input must be HxWxC, got " + shape_str(xv.shape()));
    if (kv.rank() != 4) throw std::invalid_argument("conv2d kernel must be kh x kw x Cin x Cout");
    const std::int64_t H = xv.dim(0), W = xv.dim(1), Ci = xv.dim(2);
    const std::int64_t kh = kv.dim(0), kw = kv.dim(1), Co = kv.dim(3);
    if (kv.dim(2) != Ci)
        throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(xv.shape()) +
                                    " vs kernel " + shape_str(kv.shape()));
    if (kh % 2 == 0 || kw % 2 == 0) throw std::invalid_argument("conv2d kernel size must be odd");
    if (dil_h < 1 || dil_w < 1) throw std::invalid_argument("conv2d dilation must be >= 1");
    const std::int64_t keff_h = static_cast<std::int64_t>(dil_h) * (kh - 1) + 1;
    const std::int64_t keff_w = static_cast<std::int64_t>(dil_w) * (kw - 1) + 1;

    std::int64_t Ho, Wo, ph, pw;
    if (pad == Pad2d::same) {
        Ho = H;
        Wo = W;
        ph = static_cast<std::int64_t>(dil_h) * (kh - 1) / 2;
        pw = static_cast<std::int64_t>(dil_w) * (kw - 1) / 2;
    } else {
        if (H < keff_h || W < keff_w)
            throw std::invalid_argument("conv2d padding=none needs input >= effective kernel " +
                                        std::to_string(keff_h) + "x" + std::to_string(keff_w) +
                                        ", got " + shape_str(xv.shape()));
        Ho = H - keff_h + 1;
        Wo = W - keff_w + 1;
        ph = pw = 0;
    }

    Tensor out({Ho, Wo, Co});
    {
        const double* __restrict xd = xv.data();
        const double* __restrict kd = kv.data();
        const double* bd = bias ? bias->value.data() : nullptr;
        double* __restrict yd = out.data();
        AccBuf acc(Co);
        for (std::int64_t oi = 0; oi < Ho; ++oi) {
            for (std::int64_t oj = 0; oj < Wo; ++oj) {
                double* __restrict a = acc.reset(bd);
                for (std::int64_t u = 0; u < kh; ++u) {
                    const std::int64_t si = oi + u * dil_h - ph;
                    if (si < 0 || si >= H) continue;
                    for (std::int64_t v = 0; v < kw; ++v) {
                        const std::int64_t sj = oj + v * dil_w - pw;
                        if (sj < 0 || sj >= W) continue;
                        const double* __restrict xrow = xd + (si * W + sj) * Ci;
                        const double* __restrict krow = kd + (u * kw + v) * Ci * Co;
                        for (std::int64_t ci = 0; ci < Ci; ++ci)
                            axpy(xrow[ci], krow + ci * Co, a, Co);
                    }
                }
                double* yrow = yd + (oi * Wo + oj) * Co;
                for (std::int64_t co = 0; co < Co; ++co) yrow[co] = a[co];
            }
        }
    }

    Value xp = x, kp = kernel, bp = bias;
    Tensor xsave = xv, ksave = kv;
    return make_op("conv2d", std::move(out), {x, kernel, bias},
                   [=](const Tensor& gy, GradSink& sink) {
                       const double* gyd = gy.data();
                       Tensor* gb = bp ? sink.acc(bp.get()) : nullptr;
                       if (gb) {
                           double* gbd = gb->data();
                           for (std::int64_t i = 0; i < Ho * Wo; ++i)
                               for (std::int64_t co = 0; co < Co; ++co) gbd[co] += gyd[i * Co + co];
                       }
                       Tensor* gk = sink.acc(kp.get());
                       if (gk) {
                           const double* xd = xsave.data();
                           double* gkd = gk->data();
                           for (std::int64_t oi = 0; oi < Ho; ++oi)
                               for (std::int64_t oj = 0; oj < Wo; ++oj) {
                                   const double* gyrow = gyd + (oi * Wo + oj) * Co;
                                   for (std::int64_t u = 0; u < kh; ++u) {
                                       const std::int64_t si = oi + u * dil_h - ph;
                                       if (si < 0 || si >= H) continue;
                                       for (std::int64_t v = 0; v < kw; ++v) {
                                           const std::int64_t sj = oj + v * dil_w - pw;
                                           if (sj < 0 || sj >= W) continue;
                                           const double* xrow = xd + (si * W + sj) * Ci;
                                           double* gkrow = gkd + (u * kw + v) * Ci * Co;
                                           for (std::int64_t ci = 0; ci < Ci; ++ci)
                                               axpy(xrow[ci], gyrow, gkrow + ci * Co, Co);
                                       }
                                   }
                               }
                       }
                       Tensor* gx = sink.acc(xp.get());
                       if (gx) {
                           // Cout-major kernel copy so the ci loop is a
                           // contiguous axpy
                           Tensor kt({kh, kw, Co, Ci});
                           {
                               const double* kd = ksave.data();
                               double* ktd = kt.data();
                               for (std::int64_t uv = 0; uv < kh * kw; ++uv) {
                                   const double* src = kd + uv * Ci * Co;
                                   double* dst = ktd + uv * Co * Ci;
                                   for (std::int64_t ci = 0; ci < Ci; ++ci)
                                       for (std::int64_t co = 0; co < Co; ++co)
                                           dst[co * Ci + ci] = src[ci * Co + co];
                               }
                           }
                           const double* __restrict ktd = kt.data();
                           double* __restrict gxd = gx->data();
                           AccBuf acc(Ci);
                           for (std::int64_t si = 0; si < H; ++si)
                               for (std::int64_t sj = 0; sj < W; ++sj) {
                                   double* __restrict a = acc.reset(nullptr);
                                   for (std::int64_t u = 0; u < kh; ++u) {
                                       const std::int64_t oi = si - u * dil_h + ph;
                                       if (oi < 0 || oi >= Ho) continue;
                                       for (std::int64_t v = 0; v < kw; ++v) {
                                           const std::int64_t oj = sj - v * dil_w + pw;
                                           if (oj < 0 || oj >= Wo) continue;
                                           const double* __restrict gyrow = gyd + (oi * Wo + oj) * Co;
                                           const double* __restrict ktrow = ktd + (u * kw + v) * Co * Ci;
                                           for (std::int64_t co = 0; co < Co; ++co)
                                               axpy(gyrow[co], ktrow + co * Ci, a, Ci);
                                       }
                                   }
                                   double* gxrow = gxd + (si * W + sj) * Ci;
                                   for (std::int64_t ci = 0; ci < Ci; ++ci) gxrow[ci] += a[ci];
                               }
                       }
                   });
}

Value conv1d_time(const Value& x, const Value& kernel, const Value& bias, int dilation, Pad1d pad) {
    const Tensor& xv = x->value;
    const Tensor& kv = kernel->value;
    if (xv.rank() != 2 && xv.rank() != 3)
        throw std::invalid_argument("conv1d_time input must be TxC or TxPxC, got " +
                                    shape_str(xv.shape()));
    const bool rank2 = xv.rank() == 2;
    const std::int64_t T = xv.dim(0);
    const std::int64_t P = rank2 ? 1 : xv.dim(1);
    const std::int64_t Ci = rank2 ? xv.dim(1) : xv.dim(2);
    if (kv.rank() != 3) throw std::invalid_argument("conv1d_time kernel must be kt x Cin x Cout");
    const std::int64_t kt = kv.dim(0), Co = kv.dim(2);
    if (kv.dim(1) != Ci)
        throw std::invalid_argument("conv1d_time channel mismatch: input " + shape_str(xv.shape()) +
                                    " vs kernel " + shape_str(kv.shape()));
    if (dilation < 1) throw std::invalid_argument("conv1d_time dilation must be >= 1");
    const std::int64_t span = static_cast<std::int64_t>(dilation) * (kt - 1);

    std::int64_t To;
    if (pad == Pad1d::causal) {
        To = T;
    } else {
        if (T < span + 1)
            throw std::invalid_argument("conv1d_time padding=none needs T >= " +
                                        std::to_string(span + 1) + ", got T=" + std::to_string(T));
        To = T - span;
    }

    // output index t reads input t + u*d - offset, offset = span for causal
    const std::int64_t off = (pad == Pad1d::causal) ? span : 0;

    Tensor out(rank2 ? Shape{To, Co} : Shape{To, P, Co});
    {
        const double* __restrict xd = xv.data();
        const double* __restrict kd = kv.data();
        const double* bd = bias ? bias->value.data() : nullptr;
        double* __restrict yd = out.data();
        AccBuf acc(Co);
        for (std::int64_t t = 0; t < To; ++t) {
            double* yplane = yd + t * P * Co;
            for (std::int64_t p = 0; p < P; ++p) {
                double* __restrict a = acc.reset(bd);
                for (std::int64_t u = 0; u < kt; ++u) {
                    const std::int64_t st = t + u * dilation - off;
                    if (st < 0 || st >= T) continue;
                    const double* __restrict xrow = xd + (st * P + p) * Ci;
                    const double* __restrict krow = kd + u * Ci * Co;
                    for (std::int64_t ci = 0; ci < Ci; ++ci) axpy(xrow[ci], krow + ci * Co, a, Co);
                }
                double* yrow = yplane + p * Co;
                for (std::int64_t co = 0; co < Co; ++co) yrow[co] = a[co];
            }
        }
    }

    Value xp = x, kp = kernel, bp = bias;
    Tensor xsave = xv, ksave = kv;
    return make_op("conv1d_time", std::move(out), {x, kernel, bias},
                   [=](const Tensor& gy, GradSink& sink) {
                       const double* gyd = gy.data();
                       Tensor* gb = bp ? sink.acc(bp.get()) : nullptr;
                       if (gb) {
                           double* gbd = gb->data();
                           for (std::int64_t i = 0; i < To * P; ++i)
                               for (std::int64_t co = 0; co < Co; ++co) gbd[co] += gyd[i * Co + co];
                       }
                       Tensor* gk = sink.acc(kp.get());
                       if (gk) {
                           const double* xd = xsave.data();
                           double* gkd = gk->data();
                           for (std::int64_t t = 0; t < To; ++t)
                               for (std::int64_t u = 0; u < kt; ++u) {
                                   const std::int64_t st = t + u * dilation - off;
                                   if (st < 0 || st >= T) continue;
                                   const double* xplane = xd + st * P * Ci;
                                   const double* gyplane = gyd + t * P * Co;
                                   double* gkrow = gkd + u * Ci * Co;
                                   for (std::int64_t p = 0; p < P; ++p) {
                                       const double* xrow = xplane + p * Ci;
                                       const double* gyrow = gyplane + p * Co;
                                       for (std::int64_t ci = 0; ci < Ci; ++ci)
                                           axpy(xrow[ci], gyrow, gkrow + ci * Co, Co);
                                   }
                               }
                       }
                       Tensor* gx = sink.acc(xp.get());
                       if (gx) {
                           Tensor ktr({kt, Co, Ci});
                           {
                               const double* kd = ksave.data();
                               double* ktd = ktr.data();
                               for (std::int64_t u = 0; u < kt; ++u)
                                   for (std::int64_t ci = 0; ci < Ci; ++ci)
                                       for (std::int64_t co = 0; co < Co; ++co)
                                           ktd[(u * Co + co) * Ci + ci] = kd[(u * Ci + ci) * Co + co];
                           }
                           const double* __restrict ktd = ktr.data();
                           double* __restrict gxd = gx->data();
                           AccBuf acc(Ci);
                           for (std::int64_t st = 0; st < T; ++st)
                               for (std::int64_t p = 0; p < P; ++p) {
                                   double* __restrict a = acc.reset(nullptr);
                                   for (std::int64_t u = 0; u < kt; ++u) {
                                       const std::int64_t t = st - u * dilation + off;
                                       if (t < 0 || t >= To) continue;
                                       const double* __restrict gyrow = gyd + (t * P + p) * Co;
                                       const double* __restrict ktrow = ktd + u * Co * Ci;
                                       for (std::int64_t co = 0; co < Co; ++co)
                                           axpy(gyrow[co], ktrow + co * Ci, a, Ci);
                                   }
                                   double* gxrow = gxd + (st * P + p) * Ci;
                                   for (std::int64_t ci = 0; ci < Ci; ++ci) gxrow[ci] += a[ci];
                               }
                       }
                   });
}

// ---------------------------------------------------------------------------
// pointwise and reductions

Value pointwise_linear(const Value& x, const Value& w, const Value& b) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (wv.rank() != 2) throw std::invalid_argument("pointwise_linear weight must be Cin x Cout");
    if (xv.rank() < 1) throw std::invalid_argument("pointwise_linear input must have a channel axis");
    const std::int64_t Ci = wv.dim(0), Co = wv.dim(1);
    if (xv.dim(xv.rank() - 1) != Ci)
        throw std::invalid_argument("pointwise_linear channel mismatch: input " +
                                    shape_str(xv.shape()) + " vs weight " + shape_str(wv.shape()));
    const std::int64_t N = xv.size() / Ci;
    Shape oshape = xv.shape();
    oshape.back() = Co;

    Tensor out(oshape);
    {
        const double* __restrict xd = xv.data();
        const double* __restrict wd = wv.data();
        const double* bd = b ? b->value.data() : nullptr;
        double* __restrict yd = out.data();
        AccBuf acc(Co);
        for (std::int64_t i = 0; i < N; ++i) {
            double* __restrict a = acc.reset(bd);
            const double* __restrict xrow = xd + i * Ci;
            for (std::int64_t ci = 0; ci < Ci; ++ci) axpy(xrow[ci], wd + ci * Co, a, Co);
            double* yrow = yd + i * Co;
            for (std::int64_t co = 0; co < Co; ++co) yrow[co] = a[co];
        }
    }

    Value xp = x, wp = w, bp = b;
    Tensor xsave = xv, wsave = wv;
    return make_op("pointwise_linear", std::move(out), {x, w, b},
                   [=](const Tensor& gy, GradSink& sink) {
                       const double* gyd = gy.data();
                       Tensor* gb = bp ? sink.acc(bp.get()) : nullptr;
                       if (gb) {
                           double* gbd = gb->data();
                           for (std::int64_t i = 0; i < N; ++i)
                               for (std::int64_t co = 0; co < Co; ++co) gbd[co] += gyd[i * Co + co];
                       }
                       Tensor* gw = sink.acc(wp.get());
                       if (gw) {
                           const double* xd = xsave.data();
                           double* gwd = gw->data();
                           for (std::int64_t i = 0; i < N; ++i) {
                               const double* xrow = xd + i * Ci;
                               const double* gyrow = gyd + i * Co;
                               for (std::int64_t ci = 0; ci < Ci; ++ci)
                                   axpy(xrow[ci], gyrow, gwd + ci * Co, Co);
                           }
                       }
                       Tensor* gx = sink.acc(xp.get());
                       if (gx) {
                           Tensor wt({Co, Ci});
                           {
                               const double* wd = wsave.data();
                               double* wtd = wt.data();
                               for (std::int64_t ci = 0; ci < Ci; ++ci)
                                   for (std::int64_t co = 0; co < Co; ++co)
                                       wtd[co * Ci + ci] = wd[ci * Co + co];
                           }
                           const double* __restrict wtd = wt.data();
                           double* __restrict gxd = gx->data();
                           AccBuf acc(Ci);
                           for (std::int64_t i = 0; i < N; ++i) {
                               double* __restrict a = acc.reset(nullptr);
                               const double* __restrict gyrow = gyd + i * Co;
                               for (std::int64_t co = 0; co < Co; ++co)
                                   axpy(gyrow[co], wtd + co * Ci, a, Ci);
                               double* gxrow = gxd + i * Ci;
                               for (std::int64_t ci = 0; ci < Ci; ++ci) gxrow[ci] += a[ci];
                           }
                       }
                   });
}

double gelu_scalar(double x) {
    const double s = std::sqrt(2.0 / std::numbers::pi);
    const double u = s * (x + 0.044715 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

Value gelu(const Value& x) {
    const Tensor& xv = x->value;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = gelu_scalar(xv[i]);
    Value xp = x;
    Tensor xsave = xv;
    return make_op("gelu", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (!gx) return;
        const double s = std::sqrt(2.0 / std::numbers::pi);
        double* gxd = gx->data();
        const double* gyd = gy.data();
        const double* xd = xsave.data();
        for (std::int64_t i = 0; i < xsave.size(); ++i) {
            const double v = xd[i];
            const double u = s * (v + 0.044715 * v * v * v);
            const double th = std::tanh(u);
            const double sech2 = 1.0 - th * th;
            const double d = 0.5 * (1.0 + th) + 0.5 * v * sech2 * s * (1.0 + 3.0 * 0.044715 * v * v);
            gxd[i] += gyd[i] * d;
        }
    });
}

Value sigmoid(const Value& x) {
    const Tensor& xv = x->value;
    Tensor out(xv.shape());
    for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    Tensor ysave = out;
    Value xp = x;
    return make_op("sigmoid", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (!gx) return;
        double* gxd = gx->data();
        const double* gyd = gy.data();
        const double* yd = ysave.data();
        for (std::int64_t i = 0; i < ysave.size(); ++i) gxd[i] += gyd[i] * yd[i] * (1.0 - yd[i]);
    });
}

Value global_avg_pool(const Value& x) {
    const Tensor& xv = x->value;
    if (xv.rank() != 3) throw std::invalid_argument("global_avg_pool input must be HxWxC");
    const std::int64_t HW = xv.dim(0) * xv.dim(1), C = xv.dim(2);
    Tensor out({C});
    {
        const double* xd = xv.data();
        double* yd = out.data();
        for (std::int64_t i = 0; i < HW; ++i)
            for (std::int64_t c = 0; c < C; ++c) yd[c] += xd[i * C + c];
        for (std::int64_t c = 0; c < C; ++c) yd[c] /= static_cast<double>(HW);
    }
    Value xp = x;
    return make_op("global_avg_pool", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (!gx) return;
        const double inv = 1.0 / static_cast<double>(HW);
        double* gxd = gx->data();
        const double* gyd = gy.data();
        for (std::int64_t i = 0; i < HW; ++i)
            for (std::int64_t c = 0; c < C; ++c) gxd[i * C + c] += gyd[c] * inv;
    });
}

Value mul_channels(const Value& x, const Value& s) {
    const Tensor& xv = x->value;
    const Tensor& sv = s->value;
    if (xv.rank() != 3 || sv.rank() != 1 || sv.dim(0) != xv.dim(2))
        throw std::invalid_argument("mul_channels expects HxWxC input and C gate");
    const std::int64_t HW = xv.dim(0) * xv.dim(1), C = xv.dim(2);
    Tensor out(xv.shape());
    {
        const double* xd = xv.data();
        const double* sd = sv.data();
        double* yd = out.data();
        for (std::int64_t i = 0; i < HW; ++i)
            for (std::int64_t c = 0; c < C; ++c) yd[i * C + c] = xd[i * C + c] * sd[c];
    }
    Value xp = x, sp = s;
    Tensor xsave = xv, ssave = sv;
    return make_op("mul_channels", std::move(out), {x, s}, [=](const Tensor& gy, GradSink& sink) {
        const double* gyd = gy.data();
        Tensor* gx = sink.acc(xp.get());
        if (gx) {
            double* gxd = gx->data();
            const double* sd = ssave.data();
            for (std::int64_t i = 0; i < HW; ++i)
                for (std::int64_t c = 0; c < C; ++c) gxd[i * C + c] += gyd[i * C + c] * sd[c];
        }
        Tensor* gs = sink.acc(sp.get());
        if (gs) {
            double* gsd = gs->data();
            const double* xd = xsave.data();
            for (std::int64_t i = 0; i < HW; ++i)
                for (std::int64_t c = 0; c < C; ++c) gsd[c] += gyd[i * C + c] * xd[i * C + c];
        }
    });
}

namespace {

void require_same_shape(const char* tag, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(tag) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

}  // namespace

Value add(const Value& a, const Value& b) {
    require_same_shape("add", a->value, b->value);
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
    Value ap = a, bp = b;
    return make_op("add", std::move(out), {a, b}, [=](const Tensor& gy, GradSink& sink) {
        for (Node* n : {ap.get(), bp.get()}) {
            Tensor* g = sink.acc(n);
            if (g)
                for (std::int64_t i = 0; i < gy.size(); ++i) (*g)[i] += gy[i];
        }
    });
}

Value sub(const Value& a, const Value& b) {
    require_same_shape("sub", a->value, b->value);
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
    Value ap = a, bp = b;
    return make_op("sub", std::move(out), {a, b}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* ga = sink.acc(ap.get());
        if (ga)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i];
        Tensor* gb = sink.acc(bp.get());
        if (gb)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*gb)[i] -= gy[i];
    });
}

Value mul(const Value& a, const Value& b) {
    require_same_shape("mul", a->value, b->value);
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
    Value ap = a, bp = b;
    Tensor as = a->value, bs = b->value;
    return make_op("mul", std::move(out), {a, b}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* ga = sink.acc(ap.get());
        if (ga)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * bs[i];
        Tensor* gb = sink.acc(bp.get());
        if (gb)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * as[i];
    });
}

Value div(const Value& a, const Value& b) {
    require_same_shape("div", a->value, b->value);
    Tensor out(a->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a->value[i] / b->value[i];
    Value ap = a, bp = b;
    Tensor as = a->value, bs = b->value;
    return make_op("div", std::move(out), {a, b}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* ga = sink.acc(ap.get());
        if (ga)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] / bs[i];
        Tensor* gb = sink.acc(bp.get());
        if (gb)
            for (std::int64_t i = 0; i < gy.size(); ++i)
                (*gb)[i] -= gy[i] * as[i] / (bs[i] * bs[i]);
    });
}

Value scale(const Value& x, double c) {
    Tensor out(x->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x->value[i] * c;
    Value xp = x;
    return make_op("scale", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (gx)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * c;
    });
}

Value add_scalar(const Value& x, double c) {
    Tensor out(x->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x->value[i] + c;
    Value xp = x;
    return make_op("add_scalar", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (gx)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i];
    });
}

Value reduce_sum(const Value& x) {
    double s = 0.0;
    for (std::int64_t i = 0; i < x->value.size(); ++i) s += x->value[i];
    Value xp = x;
    return make_op("reduce_sum", Tensor::scalar(s), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (gx)
            for (std::int64_t i = 0; i < gx->size(); ++i) (*gx)[i] += gy[0];
    });
}

Value reduce_mean(const Value& x) {
    const std::int64_t n = x->value.size();
    if (n == 0) throw std::invalid_argument("reduce_mean on empty tensor");
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += x->value[i];
    Value xp = x;
    return make_op("reduce_mean", Tensor::scalar(s / static_cast<double>(n)), {x},
                   [=](const Tensor& gy, GradSink& sink) {
                       Tensor* gx = sink.acc(xp.get());
                       if (gx) {
                           const double g = gy[0] / static_cast<double>(n);
                           for (std::int64_t i = 0; i < n; ++i) (*gx)[i] += g;
                       }
                   });
}

Value sqrt_eps(const Value& x) {
    constexpr double kEps = 1e-12;
    Tensor out(x->value.shape());
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(x->value[i] + kEps);
    Tensor ysave = out;
    Value xp = x;
    return make_op("sqrt_eps", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (gx)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * 0.5 / ysave[i];
    });
}

Value broadcast_to(const Value& s, Shape shape) {
    if (s->value.size() != 1) throw std::invalid_argument("broadcast_to expects a scalar");
    Tensor out = Tensor::full(shape, s->value[0]);
    Value sp = s;
    return make_op("broadcast_to", std::move(out), {s}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gs = sink.acc(sp.get());
        if (gs) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < gy.size(); ++i) acc += gy[i];
            (*gs)[0] += acc;
        }
    });
}

Value reshape(const Value& x, Shape shape) {
    Tensor out = x->value.reshaped(shape);
    Value xp = x;
    Shape oldshape = x->value.shape();
    return make_op("reshape", std::move(out), {x}, [=](const Tensor& gy, GradSink& sink) {
        Tensor* gx = sink.acc(xp.get());
        if (gx)
            for (std::int64_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i];
    });
}

}  // namespace stdown::ad
