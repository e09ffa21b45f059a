#include "prime/dataset.hpp"

#include <fstream>

#include "prime/binio.hpp"
#include "prime/errors.hpp"

namespace prime {

namespace {
constexpr char kMagic[4] = {'P', 'M', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open dataset for writing: " + path);

    os.write(kMagic, 4);
    binio::write_pod<std::uint32_t>(os, kVersion);
    binio::write_pod<std::uint64_t>(os, ds.n_b);
    binio::write_pod<std::uint64_t>(os, ds.n_p);
    binio::write_pod<double>(os, ds.norms.payload_len_div);
    binio::write_pod<double>(os, ds.norms.window_div);
    binio::write_pod<double>(os, ds.norms.iat_clamp_s);
    binio::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ds.class_names.size()));
    for (const std::string& name : ds.class_names) binio::write_string(os, name);

    const std::size_t width = ds.width();
    binio::write_pod<std::uint64_t>(os, ds.samples.size());
    for (const FeatureVector& fv : ds.samples) {
        if (fv.x.size() != width)
            throw ShapeError("dataset sample width " + std::to_string(fv.x.size()) +
                             " does not match header width " + std::to_string(width));
        binio::write_pod<std::int32_t>(os, fv.label);
        os.write(reinterpret_cast<const char*>(fv.x.data()),
                 static_cast<std::streamsize>(width * sizeof(double)));
    }
    if (!os) throw Error("short write while saving dataset: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open dataset: " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != std::string(kMagic, 4))
        throw UnsupportedFormatError("not a dataset file: " + path);
    const auto version = binio::read_pod<std::uint32_t>(is, "version");
    if (version != kVersion)
        throw UnsupportedFormatError("dataset version " + std::to_string(version));

    Dataset ds;
    ds.n_b = binio::read_pod<std::uint64_t>(is, "n_b");
    ds.n_p = binio::read_pod<std::uint64_t>(is, "n_p");
    ds.norms.payload_len_div = binio::read_pod<double>(is, "normalizer");
    ds.norms.window_div = binio::read_pod<double>(is, "normalizer");
    ds.norms.iat_clamp_s = binio::read_pod<double>(is, "normalizer");
    const auto n_classes = binio::read_pod<std::uint32_t>(is, "class table");
    for (std::uint32_t i = 0; i < n_classes; ++i)
        ds.class_names.push_back(binio::read_string(is, "class name"));

    const std::size_t width = ds.width();
    const auto n = binio::read_pod<std::uint64_t>(is, "sample count");
    ds.samples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        FeatureVector fv;
        fv.label = binio::read_pod<std::int32_t>(is, "label");
        fv.x.resize(width);
        is.read(reinterpret_cast<char*>(fv.x.data()),
                static_cast<std::streamsize>(width * sizeof(double)));
        if (!is)
            throw ParseError(static_cast<std::size_t>(is.tellg()), "truncated sample record");
        ds.samples.push_back(std::move(fv));
    }
    return ds;
}

void export_dataset_csv(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error("cannot open CSV for writing: " + path);

    os << "label";
    for (std::size_t i = 0; i < ds.n_b; ++i) os << ",pay" << i;
    for (std::size_t i = 0; i < ds.n_p; ++i)
        os << ",len" << i << ",win" << i << ",iat" << i << ",dir" << i;
    os << "\n";
    os.precision(12);
    for (const FeatureVector& fv : ds.samples) {
        os << fv.label;
        for (double v : fv.x) os << "," << v;
        os << "\n";
    }
}

Batch to_batch(const std::vector<FeatureVector>& samples, std::size_t width) {
    Batch b;
    if (samples.empty()) return b;
    b.x = Tensor(samples.size(), width, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].x.size() != width) throw ShapeError("batch sample width mismatch");
        for (std::size_t j = 0; j < width; ++j) b.x(i, j) = samples[i].x[j];
        b.y.push_back(samples[i].label);
    }
    return b;
}

}  // namespace prime
