#pragma once

#include <string>
#include <vector>

#include "prime/features.hpp"
#include "prime/tensor.hpp"

namespace prime {

// Labeled feature-vector collection plus the geometry and normalization it
// was produced under.  The on-disk form is the shared interchange format
// between pcap ingestion, the synthetic generator, and the harness.
struct Dataset {
    std::size_t n_b = 0;
    std::size_t n_p = 0;
    Normalizers norms;
    std::vector<std::string> class_names;  // index = label
    std::vector<FeatureVector> samples;

    std::size_t width() const { return feature_width(n_b, n_p); }
};

void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// Human-inspectable export: one row per sample, label first.
void export_dataset_csv(const std::string& path, const Dataset& ds);

// Pack a list of samples into a (rows x width) batch plus a label vector.
struct Batch {
    Tensor x;
    std::vector<int> y;
};

Batch to_batch(const std::vector<FeatureVector>& samples, std::size_t width);

}  // namespace prime
