#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fedlog {

// Class ids are 1-based: labels[i] lies in {1..n_class}.
struct LabeledDataset {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    std::size_t n_class = 0;

    std::size_t size() const { return inputs.size(); }
};

void validate_dataset(const LabeledDataset& data);

struct PartitionSpec {
    std::size_t n_clients = 0;
    std::size_t classes_per_client = 0;
    std::uint64_t seed = 0;
};

// n points uniform on [-5,5]^2; class 2 inside the origin circle of
// radius 26/7, class 1 outside.
LabeledDataset gen_circle(std::size_t n, std::uint64_t seed);

// Sorts by the first coordinate and gives the lower half to client 0.
std::pair<LabeledDataset, LabeledDataset> split_by_sorted_x1(
    const LabeledDataset& data);

// Sorts by label, cuts into n_clients * classes_per_client contiguous
// shards (near-equal sizes when not divisible), shuffles shard order with
// spec.seed, and deals classes_per_client shards to each client.
std::vector<LabeledDataset> shard_partition(const LabeledDataset& data,
                                            const PartitionSpec& spec);

// Keeps roughly `fraction` of each class, chosen by seeded shuffle;
// original point order is preserved among the survivors.
LabeledDataset stratified_subsample(const LabeledDataset& data,
                                    double fraction, std::uint64_t seed);

// Splits a held-out set across clients so each client's test label counts
// are proportional to its training label counts (largest remainder).
std::vector<LabeledDataset> partition_test_like(
    const LabeledDataset& test,
    const std::vector<LabeledDataset>& train_parts, std::uint64_t seed);

// IDX tensor of unsigned bytes; shape.size() is 1 for label files and 3
// for image files.
struct IdxTensor {
    std::vector<std::uint32_t> shape;
    std::vector<std::uint8_t> data;
};

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes);

// Loads an image/label IDX pair; pixels are rescaled to [0,1] and byte
// labels k become class ids k+1. n_class 0 means infer from the labels.
LabeledDataset load_idx_dataset(const std::filesystem::path& images_path,
                                const std::filesystem::path& labels_path,
                                std::size_t n_class = 0);

}  // namespace fedlog
