#include "mmfuse/vision_dsp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

int clampi(int i, int n) { return std::clamp(i, 0, n - 1); }

} // namespace

Frame preprocess_frame(const Frame &frame, const NlmParams &params) {
    const int rows = frame.height(), cols = frame.width();
    if (rows == 0 || cols == 0) throw InvalidInput("preprocess_frame: zero-area frame");

    const Image img = to_image(frame);
    const int pr = params.patch_radius, sr = params.search_radius;
    const int pw = 2 * pr + 1;
    const double scale = 1.0 / (pw * pw * params.h * params.h);

    // Reflect-padded copy so every shifted patch stays in bounds.
    const int pad = pr + sr;
    Image padded(rows + 2 * pad, cols + 2 * pad);
    for (int r = 0; r < padded.rows(); ++r)
        for (int c = 0; c < padded.cols(); ++c) padded(r, c) = img(reflect(r - pad, rows), reflect(c - pad, cols));

    // For each search offset, the patch distance of every pixel is a box sum
    // over the squared difference between the image and its shifted copy.
    const int er = rows + 2 * pr, ec = cols + 2 * pr; // extent needed for the box sum
    const auto centre = padded.block(sr, sr, er, ec);
    Image wsum = Image::Zero(rows, cols), acc = Image::Zero(rows, cols), wmax = Image::Zero(rows, cols);
    for (int dr = -sr; dr <= sr; ++dr) {
        for (int dc = -sr; dc <= sr; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const Image diff2 = (centre - padded.block(sr + dr, sr + dc, er, ec)).square();
            Image d2 = Image::Zero(rows, cols);
            for (int i = 0; i < pw; ++i)
                for (int j = 0; j < pw; ++j) d2 += diff2.block(i, j, rows, cols);
            const Image w = (-d2 * scale).exp();
            wsum += w;
            acc += w * padded.block(pad + dr, pad + dc, rows, cols);
            wmax = wmax.max(w);
        }
    }
    // The centre pixel takes the best neighbour weight, not 1, so an isolated
    // impulse does not dominate its own average.
    wmax = (wmax > 0.0).select(wmax, 1.0);
    const Image result = (acc + wmax * img) / (wsum + wmax);

    Frame out;
    out.timestamp = frame.timestamp;
    out.pixels = result.round().max(0.0).min(255.0).cast<std::uint8_t>().matrix();
    return out;
}

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
const double kNorm = 1.0 / (4.0 * std::sqrt(2.0));
const std::array<double, 4> kDb2Low = {(1 + kSqrt3) * kNorm, (3 + kSqrt3) * kNorm, (3 - kSqrt3) * kNorm,
                                       (1 - kSqrt3) * kNorm};
const std::array<double, 4> kDb2High = {kDb2Low[3], -kDb2Low[2], kDb2Low[1], -kDb2Low[0]};

// One periodic analysis step along rows (horizontal). Returns [low | high] halves.
Image analyze_rows(const Image &x) {
    const Eigen::Index rows = x.rows(), n = x.cols(), half = n / 2;
    Image out(rows, n);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index k = 0; k < half; ++k) {
            double lo = 0.0, hi = 0.0;
            for (int t = 0; t < 4; ++t) {
                const double v = x(r, (2 * k + t) % n);
                lo += kDb2Low[t] * v;
                hi += kDb2High[t] * v;
            }
            out(r, k) = lo;
            out(r, half + k) = hi;
        }
    }
    return out;
}

Image analyze_2d(const Image &x) {
    const Image h = analyze_rows(x);
    return analyze_rows(h.transpose()).transpose();
}

} // namespace

WaveletEnergy dwt2_energy(const Image &image) {
    if (image.rows() < 8 || image.cols() < 8) throw InvalidInput("dwt2_energy: frame must be at least 8x8");
    const Eigen::Index rows = (image.rows() + 3) / 4 * 4, cols = (image.cols() + 3) / 4 * 4;
    Image x = Image::Zero(rows, cols);
    x.topLeftCorner(image.rows(), image.cols()) = image;

    // Quadrant layout after analyze_2d: columns split by the horizontal filter,
    // rows by the vertical one, so the top-right block is HL.
    const Image l1 = analyze_2d(x);
    const Eigen::Index hr = rows / 2, hc = cols / 2;
    WaveletEnergy e;
    e.subband[HL1] = l1.block(0, hc, hr, hc).square().sum();
    e.subband[LH1] = l1.block(hr, 0, hr, hc).square().sum();
    e.subband[HH1] = l1.block(hr, hc, hr, hc).square().sum();

    const Image l2 = analyze_2d(l1.block(0, 0, hr, hc));
    const Eigen::Index qr = hr / 2, qc = hc / 2;
    e.subband[LL2] = l2.block(0, 0, qr, qc).square().sum();
    e.subband[HL2] = l2.block(0, qc, qr, qc).square().sum();
    e.subband[LH2] = l2.block(qr, 0, qr, qc).square().sum();
    e.subband[HH2] = l2.block(qr, qc, qr, qc).square().sum();

    for (double s : e.subband) e.total += s;
    return e;
}

WaveletEnergy dwt2_energy(const Frame &frame) { return dwt2_energy(to_image(frame)); }

FlowField DenseFlow::operator()(const Image &prev, const Image &next) const {
    if (prev.rows() != next.rows() || prev.cols() != next.cols())
        throw InvalidInput("dense_flow: frame dimensions differ");
    if (prev.size() == 0) throw InvalidInput("dense_flow: empty frames");

    const int rows = static_cast<int>(prev.rows()), cols = static_cast<int>(prev.cols());
    Image ix(rows, cols), iy(rows, cols);
    const Image it = next - prev;
    const Image avg = 0.5 * (prev + next);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            ix(r, c) = 0.5 * (avg(r, clampi(c + 1, cols)) - avg(r, clampi(c - 1, cols)));
            iy(r, c) = 0.5 * (avg(clampi(r + 1, rows), c) - avg(clampi(r - 1, rows), c));
        }

    const double a2 = params_.alpha * params_.alpha;
    const Image denom = a2 + ix.square() + iy.square();

    Image padded(rows + 2, cols + 2);
    auto neighbourhood_mean = [&](const Image &f) {
        padded.block(1, 1, rows, cols) = f;
        padded.row(0).segment(1, cols) = f.row(0);
        padded.row(rows + 1).segment(1, cols) = f.row(rows - 1);
        padded.col(0) = padded.col(1);
        padded.col(cols + 1) = padded.col(cols);
        return Image((padded.block(0, 1, rows, cols) + padded.block(2, 1, rows, cols) + padded.block(1, 0, rows, cols) +
                      padded.block(1, 2, rows, cols)) / 6.0 +
                     (padded.block(0, 0, rows, cols) + padded.block(0, 2, rows, cols) + padded.block(2, 0, rows, cols) +
                      padded.block(2, 2, rows, cols)) / 12.0);
    };

    FlowField flow{Image::Zero(rows, cols), Image::Zero(rows, cols)};
    for (int iter = 0; iter < params_.iterations; ++iter) {
        const Image ub = neighbourhood_mean(flow.u);
        const Image vb = neighbourhood_mean(flow.v);
        const Image t = (ix * ub + iy * vb + it) / denom;
        flow.u = ub - ix * t;
        flow.v = vb - iy * t;
    }
    return flow;
}

FlowField DenseFlow::operator()(const Frame &prev, const Frame &next) const {
    return (*this)(to_image(prev), to_image(next));
}

FlowStats flow_stats(const FlowField &flow) {
    FlowStats st;
    if (flow.u.size() == 0) return st;
    const Image mag = (flow.u.square() + flow.v.square()).sqrt();
    st.mean_magnitude = mag.mean();
    st.max_magnitude = mag.maxCoeff();
    // sum of m * (cos, sin) over pixels is just the vector sum of (u, v)
    const double su = flow.u.sum(), sv = flow.v.sum();
    st.mean_angle = (su == 0.0 && sv == 0.0) ? 0.0 : std::atan2(sv, su);
    return st;
}

void write_flow_csv(const std::string &path, const FlowField &flow) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(9);
    for (const Image *plane : {&flow.u, &flow.v}) {
        for (Eigen::Index r = 0; r < plane->rows(); ++r) {
            for (Eigen::Index c = 0; c < plane->cols(); ++c) out << (c ? "," : "") << (*plane)(r, c);
            out << '\n';
        }
        if (plane == &flow.u) out << '\n';
    }
}

} // namespace mmfuse
