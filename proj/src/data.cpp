#include <berlu/data.hpp>
#include <berlu/rng.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace berlu {

void Dataset::validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw std::invalid_argument("dataset: feature rows differ from label count");
    for (int y : labels)
        if (y < 0 || y >= classes)
            throw std::invalid_argument("dataset: label out of range");
    std::vector<char> seen(labels.size(), 0);
    for (const auto* part : {&split.train_idx, &split.val_idx})
        for (std::size_t i : *part) {
            if (i >= labels.size() || seen[i])
                throw std::invalid_argument("dataset: split indices must be disjoint and in range");
            seen[i] = 1;
        }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw std::invalid_argument("dataset: split does not cover every sample");
}

Split split_80_20(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5B117));
    shuffle_in_place(perm, rng);
    const std::size_t n_train = (n * 4) / 5;
    Split s;
    s.train_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val_idx.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(s.train_idx.begin(), s.train_idx.end());
    std::sort(s.val_idx.begin(), s.val_idx.end());
    return s;
}

namespace {

void check_generator_args(std::size_t n, double noise) {
    if (n < 4)
        throw std::invalid_argument("generator: n must be >= 4");
    if (n % 2 != 0)
        throw std::invalid_argument("generator: n must be even");
    if (!(noise >= 0.0) || !std::isfinite(noise))
        throw std::invalid_argument("generator: noise must be finite and >= 0");
}

void add_noise(Matrix& x, double noise, Rng& rng) {
    if (noise == 0.0)
        return;
    std::normal_distribution<double> normal(0.0, noise);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            x(i, j) += normal(rng);
}

}  // namespace

Dataset gen_two_moons(std::size_t n, double noise, std::uint64_t seed) {
    check_generator_args(n, noise);
    const std::size_t half = n / 2;
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), 2);
    ds.labels.resize(n);
    ds.classes = 2;
    for (std::size_t i = 0; i < half; ++i) {
        const double t = M_PI * static_cast<double>(i) / static_cast<double>(half - 1);
        const auto r0 = static_cast<Eigen::Index>(i);
        const auto r1 = static_cast<Eigen::Index>(half + i);
        ds.features(r0, 0) = std::cos(t);
        ds.features(r0, 1) = std::sin(t);
        ds.labels[i] = 0;
        ds.features(r1, 0) = 1.0 - std::cos(t);
        ds.features(r1, 1) = 0.5 - std::sin(t);
        ds.labels[half + i] = 1;
    }
    Rng rng(derive_seed(seed, 0xA01));
    add_noise(ds.features, noise, rng);
    ds.split = split_80_20(n, seed);
    return ds;
}

Dataset gen_spirals(std::size_t n, double turns, double noise, std::uint64_t seed) {
    check_generator_args(n, noise);
    if (!(turns > 0.0) || !std::isfinite(turns))
        throw std::invalid_argument("spirals: turns must be > 0");
    const std::size_t half = n / 2;
    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(n), 2);
    ds.labels.resize(n);
    ds.classes = 2;
    const double max_angle = 2.0 * M_PI * turns;
    for (std::size_t i = 0; i < half; ++i) {
        // Start slightly off the centre so the arms do not share a point.
        const double frac = 0.05 + 0.95 * static_cast<double>(i) / static_cast<double>(half - 1);
        const double angle = frac * max_angle;
        const double radius = frac;
        for (int arm = 0; arm < 2; ++arm) {
            const auto row = static_cast<Eigen::Index>(arm * half + i);
            const double phase = angle + arm * M_PI;
            ds.features(row, 0) = radius * std::cos(phase);
            ds.features(row, 1) = radius * std::sin(phase);
            ds.labels[static_cast<std::size_t>(row)] = arm;
        }
    }
    Rng rng(derive_seed(seed, 0xA02));
    add_noise(ds.features, noise, rng);
    ds.split = split_80_20(n, seed);
    return ds;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IdxError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::string& what) {
    if (buf.size() < offset + 4)
        throw IdxTruncated(what + ": truncated header");
    return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
           (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void put_be32(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                           static_cast<char>(v)};
    os.write(bytes, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, double val_fraction,
                 std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("load_idx: val_fraction must lie in [0,1)");
    const auto img = read_all(images);
    const auto lab = read_all(labels);

    const std::uint32_t img_magic = read_be32(img, 0, images.string());
    if (img_magic != kIdxImageMagic)
        throw IdxMagicMismatch(images.string() + ": bad image magic");
    const std::uint32_t lab_magic = read_be32(lab, 0, labels.string());
    if (lab_magic != kIdxLabelMagic)
        throw IdxMagicMismatch(labels.string() + ": bad label magic");

    const std::uint32_t count = read_be32(img, 4, images.string());
    const std::uint32_t rows = read_be32(img, 8, images.string());
    const std::uint32_t cols = read_be32(img, 12, images.string());
    const std::uint32_t n_labels = read_be32(lab, 4, labels.string());

    const std::size_t pixels = std::size_t{rows} * cols;
    if (img.size() < 16 + std::size_t{count} * pixels)
        throw IdxTruncated(images.string() + ": image payload truncated");
    if (lab.size() < 8 + std::size_t{n_labels})
        throw IdxTruncated(labels.string() + ": label payload truncated");
    if (count != n_labels)
        throw IdxCountMismatch("image count " + std::to_string(count) + " differs from label count " +
                               std::to_string(n_labels));

    Dataset ds;
    ds.features.resize(count, static_cast<Eigen::Index>(pixels));
    ds.labels.resize(count);
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        for (std::size_t p = 0; p < pixels; ++p)
            ds.features(i, static_cast<Eigen::Index>(p)) = img[16 + std::size_t{i} * pixels + p] / 255.0;
        ds.labels[i] = lab[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.classes = max_label + 1;

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * count));
    if (n_val > 0) {
        Rng rng(derive_seed(seed, 0x1D));
        shuffle_in_place(order, rng);
    }
    ds.split.val_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    ds.split.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(ds.split.val_idx.begin(), ds.split.val_idx.end());
    std::sort(ds.split.train_idx.begin(), ds.split.train_idx.end());
    return ds;
}

void write_idx_images(const std::filesystem::path& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t{count} * rows * cols)
        throw std::invalid_argument("write_idx_images: pixel count does not match dimensions");
    std::ofstream os(path, std::ios::binary);
    put_be32(os, kIdxImageMagic);
    put_be32(os, count);
    put_be32(os, rows);
    put_be32(os, cols);
    os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::filesystem::path& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream os(path, std::ios::binary);
    put_be32(os, kIdxLabelMagic);
    put_be32(os, static_cast<std::uint32_t>(labels.size()));
    os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

void standardize(Dataset& ds) {
    const auto& idx = ds.split.train_idx.empty() ? ds.split.val_idx : ds.split.train_idx;
    if (idx.empty())
        return;
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i : idx)
            mean += ds.features(static_cast<Eigen::Index>(i), j);
        mean /= static_cast<double>(idx.size());
        double var = 0.0;
        for (std::size_t i : idx) {
            const double d = ds.features(static_cast<Eigen::Index>(i), j) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(idx.size()));
        const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
        ds.features.col(j) = (ds.features.col(j).array() - mean) * inv;
    }
}

// ---------------------------------------------------------------------------
// CSV

void write_csv(std::ostream& os, const Dataset& ds) {
    os << "y";
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j)
        os << ",x" << j;
    os << '\n';
    const auto old_prec = os.precision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.labels[i];
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j)
            os << ',' << ds.features(static_cast<Eigen::Index>(i), j);
        os << '\n';
    }
    os.precision(old_prec);
}

Dataset read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line))
        throw std::invalid_argument("csv: missing header");
    if (line.rfind("y", 0) != 0)
        throw std::invalid_argument("csv: header must start with 'y'");
    const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));

    std::vector<int> labels;
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        Eigen::Index field = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                if (field == 0)
                    labels.push_back(std::stoi(cell));
                else
                    values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::invalid_argument("csv: bad value on line " + std::to_string(lineno));
            }
            ++field;
        }
        if (field != cols + 1)
            throw std::invalid_argument("csv: wrong field count on line " + std::to_string(lineno));
    }

    Dataset ds;
    ds.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(labels.size()), cols);
    ds.labels = std::move(labels);
    int max_label = -1;
    for (int y : ds.labels) {
        if (y < 0)
            throw std::invalid_argument("csv: negative label");
        max_label = std::max(max_label, y);
    }
    ds.classes = max_label + 1;
    ds.split.train_idx.resize(ds.labels.size());
    std::iota(ds.split.train_idx.begin(), ds.split.train_idx.end(), std::size_t{0});
    return ds;
}

}  // namespace berlu
