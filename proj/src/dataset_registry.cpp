// SPDX-License-Identifier: Apache-2.0

#include "xfer/dataset_registry.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "xfer/random.hpp"

namespace xfer::data {

namespace {

std::string trim(std::string_view s) {
    size_t b = 0;
    size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_int(std::string_view s, int64_t& out) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end && !s.empty();
}

bool valid_token(const std::string& s) {
    return !s.empty() && s.find_first_of(",;\t\r\n") == std::string::npos;
}

std::string format_number(double v) {
    std::string s = fmt::format("{}", v);
    return s;
}

}  // namespace

std::string to_string(LabelMode mode) { return mode == LabelMode::single_label ? "single_label" : "multi_label"; }

LabelMode parse_label_mode(const std::string& text) {
    const std::string t = normalize_class_name(text);
    if (t == "single_label" || t == "single") return LabelMode::single_label;
    if (t == "multi_label" || t == "multi") return LabelMode::multi_label;
    throw ConfigError(fmt::format("unknown label mode '{}'", text));
}

Fraction Fraction::parse(const std::string& raw) {
    const std::string text = trim(raw);
    Fraction f{0, 1};
    // "-0.2" would otherwise read as 0.2
    if (text.find_first_of("+-") != std::string::npos) throw ConfigError(fmt::format("invalid fraction '{}'", raw));
    if (const auto slash = text.find('/'); slash != std::string::npos) {
        if (!parse_int(text.substr(0, slash), f.num) || !parse_int(text.substr(slash + 1), f.den)) {
            throw ConfigError(fmt::format("invalid fraction '{}'", raw));
        }
    } else {
        std::string digits = text;
        int64_t scale = 1;
        if (!digits.empty() && digits.back() == '%') {
            digits.pop_back();
            scale = 100;
        }
        const auto dot = digits.find('.');
        std::string whole = digits.substr(0, dot);
        std::string frac = dot == std::string::npos ? "" : digits.substr(dot + 1);
        if (whole.empty()) whole = "0";
        if (frac.size() > 12) throw ConfigError(fmt::format("fraction '{}' has too many digits", raw));
        int64_t w = 0;
        int64_t fr = 0;
        if (!parse_int(whole, w) || (!frac.empty() && !parse_int(frac, fr)) || w < 0 || fr < 0) {
            throw ConfigError(fmt::format("invalid fraction '{}'", raw));
        }
        int64_t den = 1;
        for (size_t i = 0; i < frac.size(); ++i) den *= 10;
        f.num = w * den + fr;
        f.den = den * scale;
    }
    if (f.den <= 0 || f.num <= 0 || f.num >= f.den) {
        throw ConfigError(fmt::format("fraction '{}' must lie strictly between 0 and 1", raw));
    }
    const int64_t g = std::gcd(f.num, f.den);
    f.num /= g;
    f.den /= g;
    return f;
}

std::string Fraction::str() const { return fmt::format("{}/{}", num, den); }

// DatasetManifest -------------------------------------------------------------

DatasetManifest::DatasetManifest(std::string dataset_id, LabelMode label_mode, std::vector<std::string> classes,
                                 std::vector<ImageRecord> records, DatasetMetadata metadata, std::string family)
    : dataset_id_(std::move(dataset_id)),
      family_(family.empty() ? dataset_id_ : std::move(family)),
      label_mode_(label_mode),
      classes_(std::move(classes)),
      records_(std::move(records)),
      metadata_(std::move(metadata)) {
    if (!valid_token(dataset_id_) || dataset_id_.find('=') != std::string::npos) {
        throw ManifestError(fmt::format("invalid dataset id '{}'", dataset_id_));
    }
    if (!valid_token(family_)) throw ManifestError(fmt::format("invalid dataset family '{}'", family_));
    if (classes_.empty()) throw ManifestError(fmt::format("{}: empty class vocabulary", dataset_id_));
    std::unordered_set<std::string> seen_classes;
    for (const auto& c : classes_) {
        if (!valid_token(c)) throw ManifestError(fmt::format("{}: invalid class name '{}'", dataset_id_, c));
        if (!seen_classes.insert(c).second) {
            throw ManifestError(fmt::format("{}: duplicate class '{}'", dataset_id_, c));
        }
    }
    std::unordered_set<std::string_view> seen_refs;
    seen_refs.reserve(records_.size());
    const int n_classes = static_cast<int>(classes_.size());
    for (auto& r : records_) {
        if (r.image_ref.empty() || r.image_ref.find_first_of("\t\r\n") != std::string::npos) {
            throw ManifestError(fmt::format("{}: invalid image_ref '{}'", dataset_id_, r.image_ref));
        }
        std::sort(r.labels.begin(), r.labels.end());
        r.labels.erase(std::unique(r.labels.begin(), r.labels.end()), r.labels.end());
        if (r.labels.empty()) {
            throw ManifestError(fmt::format("{}: record '{}' has no label", dataset_id_, r.image_ref));
        }
        if (label_mode_ == LabelMode::single_label && r.labels.size() != 1) {
            throw ManifestError(fmt::format("{}: record '{}' has {} labels in single_label mode", dataset_id_,
                                            r.image_ref, r.labels.size()));
        }
        for (int l : r.labels) {
            if (l < 0 || l >= n_classes) {
                throw ManifestError(fmt::format("{}: record '{}' label {} outside [0, {})", dataset_id_, r.image_ref,
                                                l, n_classes));
            }
        }
    }
    for (const auto& r : records_) {
        if (!seen_refs.insert(r.image_ref).second) {
            throw ManifestError(fmt::format("{}: duplicate image_ref '{}'", dataset_id_, r.image_ref));
        }
    }
}

std::vector<size_t> DatasetManifest::primary_class_counts() const {
    std::vector<size_t> counts(classes_.size(), 0);
    for (const auto& r : records_) ++counts[static_cast<size_t>(r.primary_label())];
    return counts;
}

DatasetManifest parse_manifest(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw ManifestError(fmt::format("{}: empty manifest", origin));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind('#', 0) != 0) throw ManifestError(fmt::format("{}: missing '#' header line", origin));

    std::map<std::string, std::string> header;
    for (const auto& field : split(std::string_view(line).substr(1), ';')) {
        if (trim(field).empty()) continue;
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ManifestError(fmt::format("{}: malformed header field '{}'", origin, field));
        header[trim(field.substr(0, eq))] = trim(field.substr(eq + 1));
    }
    for (const char* key : {"dataset_id", "label_mode", "classes"}) {
        if (!header.contains(key)) throw ManifestError(fmt::format("{}: header lacks '{}'", origin, key));
    }
    LabelMode mode;
    try {
        mode = parse_label_mode(header["label_mode"]);
    } catch (const ConfigError& e) {
        throw ManifestError(fmt::format("{}: {}", origin, e.what()));
    }
    std::vector<std::string> classes;
    for (const auto& c : split(header["classes"], ',')) classes.push_back(trim(c));

    DatasetMetadata meta;
    if (auto it = header.find("image_size"); it != header.end()) {
        int64_t v = 0;
        std::string s = it->second;
        if (auto x = s.find('x'); x != std::string::npos) s = s.substr(0, x);
        if (!parse_int(s, v) || v <= 0) throw ManifestError(fmt::format("{}: invalid image_size", origin));
        meta.image_size = static_cast<int>(v);
    }
    if (auto it = header.find("resolution_m"); it != header.end()) {
        const auto parts = split(it->second, '-');
        try {
            const double lo = std::stod(parts.at(0));
            const double hi = parts.size() > 1 ? std::stod(parts.at(1)) : lo;
            meta.resolution_m = std::make_pair(lo, hi);
        } catch (const std::exception&) {
            throw ManifestError(fmt::format("{}: invalid resolution_m", origin));
        }
    }
    const std::string family = header.contains("family") ? header["family"] : std::string{};

    std::vector<ImageRecord> records;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ManifestError(fmt::format("{}:{}: expected 'image_ref<TAB>labels'", origin, line_no));
        }
        ImageRecord rec;
        rec.image_ref = line.substr(0, tab);
        const std::string labels = line.substr(tab + 1);
        if (!trim(labels).empty()) {
            for (const auto& tok : split(labels, ',')) {
                int64_t v = 0;
                if (!parse_int(trim(tok), v) || v < INT32_MIN || v > INT32_MAX) {
                    throw ManifestError(fmt::format("{}:{}: invalid label '{}'", origin, line_no, tok));
                }
                rec.labels.push_back(static_cast<int>(v));
            }
        }
        records.push_back(std::move(rec));
    }
    try {
        return DatasetManifest(header["dataset_id"], mode, std::move(classes), std::move(records), meta, family);
    } catch (const ManifestError& e) {
        throw ManifestError(fmt::format("{}: {}", origin, e.what()));
    }
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError(fmt::format("cannot open manifest '{}'", path.string()));
    return parse_manifest(in, path.string());
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
    out << "#dataset_id=" << m.dataset_id() << ";label_mode=" << to_string(m.label_mode()) << ";classes=";
    for (size_t i = 0; i < m.classes().size(); ++i) out << (i ? "," : "") << m.classes()[i];
    if (m.family() != m.dataset_id()) out << ";family=" << m.family();
    if (m.metadata().image_size) out << ";image_size=" << *m.metadata().image_size;
    if (m.metadata().resolution_m) {
        out << ";resolution_m=" << format_number(m.metadata().resolution_m->first) << "-"
            << format_number(m.metadata().resolution_m->second);
    }
    out << '\n';
    for (const auto& r : m.records()) {
        out << r.image_ref << '\t';
        for (size_t i = 0; i < r.labels.size(); ++i) out << (i ? "," : "") << r.labels[i];
        out << '\n';
    }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write manifest '{}'", path.string()));
    write_manifest(out, manifest);
}

// Split ----------------------------------------------------------------------

std::string to_string(SplitRole role) { return role == SplitRole::source ? "source" : "target"; }

SplitRole parse_split_role(const std::string& text) {
    if (text == "source") return SplitRole::source;
    if (text == "target") return SplitRole::target;
    throw ConfigError(fmt::format("unknown split role '{}'", text));
}

namespace {

// Indices of `members` (record indices) in canonical order, then shuffled.
void seeded_order(const DatasetManifest& m, std::vector<size_t>& members, Rng rng) {
    std::sort(members.begin(), members.end(),
              [&](size_t a, size_t b) { return m.records()[a].image_ref < m.records()[b].image_ref; });
    rng.shuffle(std::span<size_t>(members));
}

DatasetManifest with_records(const DatasetManifest& m, std::string id, const std::vector<bool>& keep) {
    std::vector<ImageRecord> out;
    for (size_t i = 0; i < m.size(); ++i) {
        if (keep[i]) out.push_back(m.records()[i]);
    }
    return DatasetManifest(std::move(id), m.label_mode(), m.classes(), std::move(out), m.metadata(), m.family());
}

// Drops classes no record references and remaps label indices.
DatasetManifest compact_vocabulary(const DatasetManifest& m) {
    std::vector<int> remap(m.num_classes(), -1);
    for (const auto& r : m.records()) {
        for (int l : r.labels) remap[static_cast<size_t>(l)] = 0;
    }
    std::vector<std::string> classes;
    for (size_t c = 0; c < remap.size(); ++c) {
        if (remap[c] == 0) {
            remap[c] = static_cast<int>(classes.size());
            classes.push_back(m.classes()[c]);
        }
    }
    std::vector<ImageRecord> records = m.records();
    for (auto& r : records) {
        for (int& l : r.labels) l = remap[static_cast<size_t>(l)];
    }
    return DatasetManifest(m.dataset_id(), m.label_mode(), std::move(classes), std::move(records), m.metadata(),
                           m.family());
}

}  // namespace

SplitResult stratified_split(const DatasetManifest& m, const SplitSpec& spec) {
    if (spec.train_fraction.num <= 0 || spec.train_fraction.num >= spec.train_fraction.den) {
        throw ConfigError("train_fraction must lie strictly between 0 and 1");
    }
    std::vector<std::vector<size_t>> by_class(m.num_classes());
    for (size_t i = 0; i < m.size(); ++i) {
        by_class[static_cast<size_t>(m.records()[i].primary_label())].push_back(i);
    }
    std::vector<bool> in_train(m.size(), false);
    const Rng base(spec.seed);
    for (size_t c = 0; c < by_class.size(); ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        const auto n = static_cast<int64_t>(members.size());
        const int64_t k = spec.train_fraction.floor_times(n);
        if (k == 0 || k == n) {
            throw ConfigError(fmt::format("{}: class '{}' has {} record(s); fraction {} leaves an empty {} portion",
                                          m.dataset_id(), m.classes()[c], n, spec.train_fraction.str(),
                                          k == 0 ? "train" : "test"));
        }
        seeded_order(m, members, base.derive({c}));
        for (int64_t i = 0; i < k; ++i) in_train[members[static_cast<size_t>(i)]] = true;
    }
    std::vector<bool> in_test(in_train.size());
    std::transform(in_train.begin(), in_train.end(), in_test.begin(), [](bool b) { return !b; });
    return {with_records(m, m.dataset_id(), in_train), with_records(m, m.dataset_id(), in_test)};
}

// Subsets --------------------------------------------------------------------

std::string to_string(SubsetMode mode) {
    switch (mode) {
        case SubsetMode::same_classes: return "same_classes";
        case SubsetMode::different_classes: return "different_classes";
        case SubsetMode::all_classes_half_images: return "all_classes_half_images";
    }
    return "?";
}

SubsetMode parse_subset_mode(const std::string& text) {
    const std::string t = normalize_class_name(text);
    if (t == "same_classes" || t == "same") return SubsetMode::same_classes;
    if (t == "different_classes" || t == "different") return SubsetMode::different_classes;
    if (t == "all_classes_half_images" || t == "half" || t == "all_classes") {
        return SubsetMode::all_classes_half_images;
    }
    throw ConfigError(fmt::format("unknown subset mode '{}'", text));
}

std::string normalize_class_name(const std::string& name) {
    std::string out = trim(name);
    for (char& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (c == ' ' || c == '-') c = '_';
    }
    return out;
}

std::vector<std::string> matched_classes(const DatasetManifest& m, const std::vector<std::string>& reference) {
    std::unordered_set<std::string> ref;
    for (const auto& r : reference) ref.insert(normalize_class_name(r));
    std::vector<std::string> out;
    for (const auto& c : m.classes()) {
        if (ref.contains(normalize_class_name(c))) out.push_back(c);
    }
    return out;
}

DatasetManifest build_subset(const DatasetManifest& m, const SubsetSpec& spec) {
    std::vector<bool> keep(m.size(), false);
    if (spec.mode == SubsetMode::all_classes_half_images) {
        std::vector<std::vector<size_t>> by_class(m.num_classes());
        for (size_t i = 0; i < m.size(); ++i) {
            by_class[static_cast<size_t>(m.records()[i].primary_label())].push_back(i);
        }
        const Rng base(spec.seed);
        for (size_t c = 0; c < by_class.size(); ++c) {
            auto& members = by_class[c];
            seeded_order(m, members, base.derive({c}));
            for (size_t i = 0; i < members.size() / 2; ++i) keep[members[i]] = true;
        }
    } else {
        if (spec.reference_classes.empty()) {
            throw ConfigError(fmt::format("{} subset needs a non-empty reference class list", to_string(spec.mode)));
        }
        std::unordered_set<std::string> ref;
        for (const auto& r : spec.reference_classes) ref.insert(normalize_class_name(r));
        std::vector<bool> class_matches(m.num_classes());
        for (size_t c = 0; c < m.num_classes(); ++c) class_matches[c] = ref.contains(normalize_class_name(m.classes()[c]));
        const bool want = spec.mode == SubsetMode::same_classes;
        for (size_t i = 0; i < m.size(); ++i) {
            keep[i] = class_matches[static_cast<size_t>(m.records()[i].primary_label())] == want;
        }
    }
    if (std::none_of(keep.begin(), keep.end(), [](bool b) { return b; })) {
        throw ConfigError(fmt::format("{}: {} subset is empty", m.dataset_id(), to_string(spec.mode)));
    }
    return compact_vocabulary(with_records(m, m.dataset_id() + "_" + to_string(spec.mode), keep));
}

ClassOverlap class_overlap(const DatasetManifest& a, const DatasetManifest& b) {
    std::set<std::string> sa;
    std::set<std::string> sb;
    for (const auto& c : a.classes()) sa.insert(normalize_class_name(c));
    for (const auto& c : b.classes()) sb.insert(normalize_class_name(c));
    ClassOverlap o;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(o.shared));
    std::set_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(o.only_a));
    std::set_difference(sb.begin(), sb.end(), sa.begin(), sa.end(), std::back_inserter(o.only_b));
    const size_t uni = o.shared.size() + o.only_a.size() + o.only_b.size();
    o.jaccard = uni == 0 ? 1.0 : static_cast<double>(o.shared.size()) / static_cast<double>(uni);
    return o;
}

const std::vector<DatasetInfo>& dataset_catalog() {
    static const std::vector<DatasetInfo> kCatalog = {
        {"mlrsnet", "MLRSNet", 109161, {46, 60}, 256, 0.1, 10.0, "single/multi-label"},
        {"resisc45", "RESISC45", 31500, {45}, 256, 0.2, 30.0, "single-label"},
        {"patternnet", "PatternNet", 30400, {38}, 256, 0.062, 4.693, "single-label"},
        {"rsi_cb", "RSI-CB", 24000, {35}, 256, 0.22, 3.0, "single-label"},
        {"aid", "AID", 10000, {30}, 600, 0.5, 8.0, "single-label"},
        {"ucm", "UCM", 2100, {21}, 256, 0.3, 0.3, "single-label"},
    };
    return kCatalog;
}

const DatasetInfo& catalog_entry(const std::string& id) {
    const std::string key = normalize_class_name(id);
    for (const auto& d : dataset_catalog()) {
        if (d.id == key) return d;
    }
    throw ConfigError(fmt::format("unknown dataset '{}'", id));
}

}  // namespace xfer::data
