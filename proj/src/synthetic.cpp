// SPDX-License-Identifier: Apache-2.0

#include "xfer/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "xfer/errors.hpp"
#include "xfer/random.hpp"

namespace xfer::synthetic {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::string_view kScheme = "synth://";

using Color = std::array<double, 3>;

enum class Pattern { stripes, checker, dots, rings, blobs, crosshatch, waves };

struct TextureClass {
    const char* name;
    Pattern pattern;
    double freq;   // cycles per image edge
    double shape;  // pattern-specific: dot radius, blob width, ...
    Color low;
    Color high;
};

// Shared classes come in pairs that share a palette and pattern and differ
// in scale, so telling them apart needs texture features rather than colour.
constexpr std::array<TextureClass, 16> kAerial{{
    {"farmland", Pattern::stripes, 3.0, 0.0, {0.45, 0.36, 0.22}, {0.42, 0.62, 0.28}},
    {"agricultural", Pattern::stripes, 4.4, 0.0, {0.45, 0.36, 0.22}, {0.42, 0.62, 0.28}},
    {"parking_lot", Pattern::dots, 4.0, 0.20, {0.38, 0.38, 0.40}, {0.85, 0.85, 0.82}},
    {"sparse_residential", Pattern::dots, 5.8, 0.20, {0.38, 0.38, 0.40}, {0.85, 0.85, 0.82}},
    {"dense_residential", Pattern::checker, 4.0, 0.0, {0.55, 0.30, 0.25}, {0.70, 0.68, 0.64}},
    {"medium_residential", Pattern::checker, 5.8, 0.0, {0.55, 0.30, 0.25}, {0.70, 0.68, 0.64}},
    {"forest", Pattern::blobs, 10.0, 0.07, {0.12, 0.25, 0.12}, {0.25, 0.45, 0.20}},
    {"chaparral", Pattern::blobs, 5.0, 0.10, {0.12, 0.25, 0.12}, {0.25, 0.45, 0.20}},
    {"desert", Pattern::waves, 2.0, 0.0, {0.78, 0.66, 0.45}, {0.90, 0.80, 0.60}},
    {"harbor", Pattern::crosshatch, 3.0, 0.0, {0.15, 0.25, 0.45}, {0.80, 0.80, 0.80}},
    {"golf_course", Pattern::blobs, 3.0, 0.16, {0.30, 0.55, 0.25}, {0.75, 0.72, 0.50}},
    {"intersection", Pattern::crosshatch, 1.5, 0.0, {0.30, 0.30, 0.30}, {0.65, 0.65, 0.62}},
    {"mobile_home_park", Pattern::stripes, 8.0, 0.0, {0.60, 0.60, 0.62}, {0.30, 0.40, 0.25}},
    {"storage_tanks", Pattern::rings, 3.0, 0.0, {0.50, 0.50, 0.48}, {0.92, 0.92, 0.90}},
    {"river", Pattern::waves, 4.0, 0.0, {0.15, 0.30, 0.40}, {0.35, 0.45, 0.30}},
    {"tennis_court", Pattern::checker, 1.5, 0.0, {0.25, 0.45, 0.35}, {0.55, 0.35, 0.30}},
}};

// Target classes: the first kShared aerial classes plus scenes the aerial
// domain never shows, placed between existing classes in scale.
constexpr int kShared = 6;
constexpr std::array<TextureClass, 2> kTargetOnly{{
    {"orchard", Pattern::dots, 4.9, 0.20, {0.30, 0.42, 0.22}, {0.55, 0.70, 0.35}},
    {"vineyard", Pattern::stripes, 6.0, 0.0, {0.45, 0.36, 0.22}, {0.42, 0.62, 0.28}},
}};

const TextureClass& texture_class(Domain d, int index) {
    if (d == Domain::target && index >= kShared) return kTargetOnly[static_cast<size_t>(index - kShared)];
    return kAerial[static_cast<size_t>(index)];
}

constexpr std::array<std::pair<const char*, Pattern>, 7> kFamilies{{
    {"striped", Pattern::stripes},
    {"chequered", Pattern::checker},
    {"dotted", Pattern::dots},
    {"concentric", Pattern::rings},
    {"blotchy", Pattern::blobs},
    {"grid", Pattern::crosshatch},
    {"marbled", Pattern::waves},
}};

// Frequency bands (cycles per image edge) of the generic classes.
constexpr std::array<std::pair<const char*, std::pair<double, double>>, 3> kBands{{
    {"coarse", {1.5, 2.8}},
    {"medium", {3.2, 5.0}},
    {"fine", {5.6, 8.0}},
}};

constexpr int kGenericClasses = static_cast<int>(kFamilies.size() * kBands.size());

double frac(double x) { return x - std::floor(x); }

double sharpen(double v, double k) { return 0.5 + 0.5 * std::tanh(k * (v - 0.5)); }

// Value in [0, 1] of a texture at centred coordinates (u, w) in [-0.5, 0.5].
struct TextureSampler {
    Pattern pattern;
    double freq;
    double shape;
    double theta;
    double phase_a;
    double phase_b;
    double cx;
    double cy;
    std::vector<std::array<double, 4>> blobs;  // x, y, sigma, amplitude
    std::vector<std::array<double, 3>> waves;  // direction, frequency, phase

    double operator()(double u, double w) const {
        const double p = u * std::cos(theta) + w * std::sin(theta);
        const double q = -u * std::sin(theta) + w * std::cos(theta);
        switch (pattern) {
            case Pattern::stripes:
                return sharpen(0.5 + 0.5 * std::sin(2 * kPi * freq * p + phase_a), 2.5);
            case Pattern::checker: {
                const double s = std::sin(2 * kPi * freq * p + phase_a) * std::sin(2 * kPi * freq * q + phase_b);
                return 0.5 + 0.5 * std::tanh(4.0 * s);
            }
            case Pattern::dots: {
                const double dp = frac(freq * p + phase_a) - 0.5;
                const double dq = frac(freq * q + phase_b) - 0.5;
                const double r = shape * 2.0;
                return std::exp(-(dp * dp + dq * dq) / (2 * r * r * 0.25));
            }
            case Pattern::rings: {
                const double r = std::hypot(u - cx, w - cy);
                return sharpen(0.5 + 0.5 * std::sin(2 * kPi * freq * r + phase_a), 3.0);
            }
            case Pattern::blobs: {
                double v = 0.0;
                for (const auto& b : blobs) {
                    const double dx = u - b[0];
                    const double dy = w - b[1];
                    v += b[3] * std::exp(-(dx * dx + dy * dy) / (2 * b[2] * b[2]));
                }
                return std::clamp(v, 0.0, 1.0);
            }
            case Pattern::crosshatch: {
                const double a = 0.5 + 0.5 * std::sin(2 * kPi * freq * p + phase_a);
                const double b = 0.5 + 0.5 * std::sin(2 * kPi * freq * q + phase_b);
                return std::max(std::pow(a, 6.0), std::pow(b, 6.0));
            }
            case Pattern::waves: {
                double v = 0.0;
                for (const auto& wv : waves) {
                    v += std::sin(2 * kPi * wv[1] * (u * std::cos(wv[0]) + w * std::sin(wv[0])) + wv[2]);
                }
                return std::clamp(0.5 + 0.5 * v / std::sqrt(static_cast<double>(waves.size())), 0.0, 1.0);
            }
        }
        return 0.0;
    }
};

Color jitter(const Color& c, Rng& rng, double sigma) {
    Color out{};
    for (int i = 0; i < 3; ++i) out[i] = c[i] + sigma * rng.normal();
    return out;
}

TextureSampler make_sampler(const TextureClass& cls, Rng& rng) {
    TextureSampler s{};
    s.pattern = cls.pattern;
    s.freq = cls.freq * rng.uniform(0.88, 1.12);
    s.shape = cls.shape * rng.uniform(0.85, 1.15);
    s.theta = rng.uniform(0.0, kPi);
    s.phase_a = rng.uniform(0.0, 2 * kPi);
    s.phase_b = rng.uniform(0.0, 2 * kPi);
    s.cx = rng.uniform(-0.5, 0.5);
    s.cy = rng.uniform(-0.5, 0.5);
    if (cls.pattern == Pattern::blobs) {
        const int n = static_cast<int>(std::lround(s.freq * s.freq * 0.6)) + 2;
        for (int i = 0; i < n; ++i) {
            s.blobs.push_back({rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), s.shape * rng.uniform(0.7, 1.3),
                               rng.uniform(0.6, 1.0)});
        }
    }
    if (cls.pattern == Pattern::waves) {
        for (int i = 0; i < 4; ++i) {
            s.waves.push_back({rng.uniform(0.0, kPi), s.freq * rng.uniform(0.7, 1.3), rng.uniform(0.0, 2 * kPi)});
        }
    }
    return s;
}

// Generic scenes: the class fixes a pattern family and a scale band; colours,
// exact scale, orientation and phase are drawn over wide ranges, so the domain
// is broad and says nothing about any aerial palette.
Image render_generic(const SynthRef& ref, Rng& rng) {
    const auto& family = kFamilies[static_cast<size_t>(ref.class_index) / kBands.size()];
    const auto& band = kBands[static_cast<size_t>(ref.class_index) % kBands.size()].second;
    TextureClass cls{};
    cls.name = family.first;
    cls.pattern = family.second;
    cls.freq = rng.uniform(band.first, band.second);
    cls.shape = cls.pattern == Pattern::blobs ? rng.uniform(0.05, 0.16) : rng.uniform(0.15, 0.25);
    cls.low = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
    do {
        cls.high = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
    } while (std::abs(cls.high[0] - cls.low[0]) + std::abs(cls.high[1] - cls.low[1]) +
                 std::abs(cls.high[2] - cls.low[2]) <
             0.5);
    const TextureSampler sampler = make_sampler(cls, rng);
    const double noise = 0.03;
    Image img(ref.size, ref.size, 3);
    for (int y = 0; y < ref.size; ++y) {
        for (int x = 0; x < ref.size; ++x) {
            const double v = sampler((x + 0.5) / ref.size - 0.5, (y + 0.5) / ref.size - 0.5);
            for (int c = 0; c < 3; ++c) {
                const double px = cls.low[c] * (1 - v) + cls.high[c] * v + noise * rng.normal();
                img.at(y, x, c) = static_cast<float>(std::clamp(px, 0.0, 1.0));
            }
        }
    }
    return img;
}

Image box_blur(const Image& in) {
    Image out(in.height, in.width, in.channels);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            for (int c = 0; c < in.channels; ++c) {
                double sum = 0.0;
                double total = 0.0;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int yy = y + dy;
                        const int xx = x + dx;
                        if (yy < 0 || xx < 0 || yy >= in.height || xx >= in.width) continue;
                        const double wgt = (dx == 0 && dy == 0) ? 2.0 : 1.0;
                        sum += wgt * in.at(yy, xx, c);
                        total += wgt;
                    }
                }
                out.at(y, x, c) = static_cast<float>(sum / total);
            }
        }
    }
    return out;
}

Image render_texture(const SynthRef& ref, Rng& rng) {
    const TextureClass& cls = texture_class(ref.domain, ref.class_index);
    const bool target = ref.domain == Domain::target;
    const TextureSampler sampler = make_sampler(cls, rng);
    const Color low = jitter(cls.low, rng, 0.04);
    const Color high = jitter(cls.high, rng, 0.04);
    const double brightness = rng.uniform(0.85, 1.15);
    const double noise = target ? 0.06 : 0.03;
    // Target sensor: warmer channel response, lifted blacks, gamma.
    constexpr Color kGain{1.12, 0.97, 0.80};
    constexpr double kOffset = 0.06;
    constexpr double kGamma = 0.85;

    Image img(ref.size, ref.size, 3);
    for (int y = 0; y < ref.size; ++y) {
        for (int x = 0; x < ref.size; ++x) {
            const double u = (x + 0.5) / ref.size - 0.5;
            const double w = (y + 0.5) / ref.size - 0.5;
            const double v = sampler(u, w);
            for (int c = 0; c < 3; ++c) {
                double px = brightness * (low[c] * (1 - v) + high[c] * v);
                if (target) px = std::pow(std::clamp(px * kGain[c] + kOffset, 0.0, 1.0), kGamma);
                img.at(y, x, c) = static_cast<float>(px);
            }
        }
    }
    if (target) img = box_blur(img);
    for (float& px : img.pixels) px = static_cast<float>(std::clamp(px + noise * rng.normal(), 0.0, 1.0));
    return img;
}

int parse_int(std::string_view text, const std::string& ref) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(fmt::format("malformed synthetic image ref '{}'", ref));
    }
    return value;
}

}  // namespace

std::string to_string(Domain d) {
    switch (d) {
        case Domain::generic: return "generic";
        case Domain::aerial: return "aerial";
        case Domain::target: return "target";
    }
    return "?";
}

Domain parse_domain(const std::string& s) {
    if (s == "generic") return Domain::generic;
    if (s == "aerial") return Domain::aerial;
    if (s == "target") return Domain::target;
    throw ConfigError(fmt::format("unknown synthetic domain '{}' (expected generic|aerial|target)", s));
}

std::string SynthRef::str() const {
    return fmt::format("synth://{}/{}/{}/{}?size={}", to_string(domain), generator_seed, class_index, image_index,
                       size);
}

bool is_synthetic_ref(const std::string& ref) { return ref.starts_with(kScheme); }

SynthRef parse_ref(const std::string& ref) {
    if (!is_synthetic_ref(ref)) throw ConfigError(fmt::format("'{}' is not a synthetic image ref", ref));
    std::string_view rest(ref);
    rest.remove_prefix(kScheme.size());
    std::vector<std::string_view> parts;
    size_t size_pos = rest.find("?size=");
    if (size_pos == std::string_view::npos) throw ConfigError(fmt::format("synthetic ref '{}' lacks ?size=", ref));
    const std::string_view size_text = rest.substr(size_pos + 6);
    rest = rest.substr(0, size_pos);
    while (true) {
        const size_t slash = rest.find('/');
        parts.push_back(rest.substr(0, slash));
        if (slash == std::string_view::npos) break;
        rest.remove_prefix(slash + 1);
    }
    if (parts.size() != 4) throw ConfigError(fmt::format("malformed synthetic image ref '{}'", ref));
    SynthRef out;
    out.domain = parse_domain(std::string(parts[0]));
    uint64_t seed = 0;
    const auto [ptr, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), seed);
    if (ec != std::errc{} || ptr != parts[1].data() + parts[1].size()) {
        throw ConfigError(fmt::format("malformed synthetic image ref '{}'", ref));
    }
    out.generator_seed = seed;
    out.class_index = parse_int(parts[2], ref);
    out.image_index = parse_int(parts[3], ref);
    out.size = parse_int(size_text, ref);
    if (out.class_index < 0 || out.class_index >= num_classes(out.domain)) {
        throw ConfigError(fmt::format("class {} out of range in '{}'", out.class_index, ref));
    }
    if (out.size < 4 || out.size > 1024) throw ConfigError(fmt::format("image size {} out of range in '{}'", out.size, ref));
    return out;
}

Image render(const SynthRef& ref) {
    Rng rng(derive_seed(ref.generator_seed, {static_cast<uint64_t>(ref.domain), static_cast<uint64_t>(ref.class_index),
                                             static_cast<uint64_t>(ref.image_index)}));
    return ref.domain == Domain::generic ? render_generic(ref, rng) : render_texture(ref, rng);
}

Image render(const std::string& ref) { return render(parse_ref(ref)); }

int num_classes(Domain d) {
    switch (d) {
        case Domain::generic: return kGenericClasses;
        case Domain::aerial: return static_cast<int>(kAerial.size());
        case Domain::target: return kShared + static_cast<int>(kTargetOnly.size());
    }
    return 0;
}

std::vector<std::string> class_names(Domain d) {
    std::vector<std::string> out;
    for (int i = 0; i < num_classes(d); ++i) {
        if (d == Domain::generic) {
            out.push_back(fmt::format("{}_{}", kFamilies[static_cast<size_t>(i) / kBands.size()].first,
                                      kBands[static_cast<size_t>(i) % kBands.size()].first));
        } else {
            out.emplace_back(texture_class(d, i).name);
        }
    }
    return out;
}

std::vector<std::string> shared_class_names() {
    auto names = class_names(Domain::aerial);
    names.resize(kShared);
    return names;
}

data::DatasetManifest make_manifest(Domain d, const SynthConfig& config) {
    if (config.images_per_class <= 0) throw ConfigError("images_per_class must be positive");
    std::vector<data::ImageRecord> records;
    const int k = num_classes(d);
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < config.images_per_class; ++i) {
            SynthRef ref{d, config.generator_seed, c, i, config.image_size};
            records.push_back({ref.str(), {c}});
        }
    }
    data::DatasetMetadata meta;
    meta.image_size = config.image_size;
    const std::string id = fmt::format("synth_{}_g{}", to_string(d), config.generator_seed);
    return data::DatasetManifest(id, data::LabelMode::single_label, class_names(d), std::move(records), meta);
}

}  // namespace xfer::synthetic
