#include "fedlog/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "fedlog/errors.hpp"
#include "fedlog/rng.hpp"

namespace fedlog {

namespace {

constexpr double kCircleRadius = 26.0 / 7.0;

LabeledDataset select(const LabeledDataset& data,
                      const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.n_class = data.n_class;
    out.inputs.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.inputs.push_back(data.inputs[i]);
        out.labels.push_back(data.labels[i]);
    }
    return out;
}

std::vector<std::size_t> sorted_by_label(const LabeledDataset& data) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return data.labels[a] < data.labels[b];
                     });
    return order;
}

std::uint32_t read_be_u32(const std::vector<std::uint8_t>& bytes,
                          std::size_t offset) {
    return (static_cast<std::uint32_t>(bytes[offset]) << 24) |
           (static_cast<std::uint32_t>(bytes[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[offset + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[offset + 3]);
}

void append_be_u32(std::vector<std::uint8_t>& bytes, std::uint32_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v >> 24));
    bytes.push_back(static_cast<std::uint8_t>(v >> 16));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

void validate_dataset(const LabeledDataset& data) {
    if (data.inputs.size() != data.labels.size()) {
        throw InputError("dataset has " + std::to_string(data.inputs.size()) +
                         " inputs but " + std::to_string(data.labels.size()) +
                         " labels");
    }
    if (data.n_class == 0) throw InputError("dataset n_class must be positive");
    for (int y : data.labels) {
        if (y < 1 || static_cast<std::size_t>(y) > data.n_class) {
            throw InputError("label " + std::to_string(y) + " outside {1.." +
                             std::to_string(data.n_class) + "}");
        }
    }
}

LabeledDataset gen_circle(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InputError("gen_circle needs at least one point");
    LabeledDataset data;
    data.n_class = 2;
    data.inputs.reserve(n);
    data.labels.reserve(n);
    Rng rng(seed);
    const double r2 = kCircleRadius * kCircleRadius;
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = rng.uniform(-5.0, 5.0);
        const double x2 = rng.uniform(-5.0, 5.0);
        data.inputs.push_back({x1, x2});
        data.labels.push_back(x1 * x1 + x2 * x2 < r2 ? 2 : 1);
    }
    return data;
}

std::pair<LabeledDataset, LabeledDataset> split_by_sorted_x1(
    const LabeledDataset& data) {
    validate_dataset(data);
    if (data.size() % 2 != 0) {
        throw InputError("split_by_sorted_x1 needs an even point count, got " +
                         std::to_string(data.size()));
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return data.inputs[a][0] < data.inputs[b][0];
                     });
    const std::size_t half = data.size() / 2;
    std::vector<std::size_t> lo(order.begin(), order.begin() + half);
    std::vector<std::size_t> hi(order.begin() + half, order.end());
    return {select(data, lo), select(data, hi)};
}

std::vector<LabeledDataset> shard_partition(const LabeledDataset& data,
                                            const PartitionSpec& spec) {
    validate_dataset(data);
    if (spec.n_clients == 0 || spec.classes_per_client == 0) {
        throw InputError("partition needs positive n_clients and classes_per_client");
    }
    const std::size_t n_shards = spec.n_clients * spec.classes_per_client;
    if (data.size() < n_shards) {
        throw InputError("cannot cut " + std::to_string(data.size()) +
                         " points into " + std::to_string(n_shards) +
                         " non-empty shards");
    }
    const std::vector<std::size_t> order = sorted_by_label(data);

    // Near-equal contiguous shards; the first (size mod n_shards) shards
    // take one extra point.
    const std::size_t base = data.size() / n_shards;
    const std::size_t extra = data.size() % n_shards;
    std::vector<std::size_t> shard_start(n_shards + 1, 0);
    for (std::size_t s = 0; s < n_shards; ++s) {
        shard_start[s + 1] = shard_start[s] + base + (s < extra ? 1 : 0);
    }

    std::vector<std::size_t> shard_order(n_shards);
    std::iota(shard_order.begin(), shard_order.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(shard_order);

    std::vector<LabeledDataset> parts(spec.n_clients);
    for (std::size_t c = 0; c < spec.n_clients; ++c) {
        std::vector<std::size_t> indices;
        for (std::size_t k = 0; k < spec.classes_per_client; ++k) {
            const std::size_t s = shard_order[c * spec.classes_per_client + k];
            for (std::size_t i = shard_start[s]; i < shard_start[s + 1]; ++i) {
                indices.push_back(order[i]);
            }
        }
        parts[c] = select(data, indices);
    }
    return parts;
}

LabeledDataset stratified_subsample(const LabeledDataset& data,
                                    double fraction, std::uint64_t seed) {
    validate_dataset(data);
    if (fraction <= 0.0 || fraction > 1.0) {
        throw InputError("subsample fraction must lie in (0,1]");
    }
    std::vector<std::vector<std::size_t>> by_class(data.n_class);
    for (std::size_t i = 0; i < data.size(); ++i) {
        by_class[static_cast<std::size_t>(data.labels[i]) - 1].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> keep;
    for (auto& members : by_class) {
        if (members.empty()) continue;
        std::size_t want = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(members.size())));
        want = std::clamp<std::size_t>(want, 1, members.size());
        rng.shuffle(members);
        keep.insert(keep.end(), members.begin(), members.begin() + want);
    }
    std::sort(keep.begin(), keep.end());
    return select(data, keep);
}

std::vector<LabeledDataset> partition_test_like(
    const LabeledDataset& test, const std::vector<LabeledDataset>& train_parts,
    std::uint64_t seed) {
    validate_dataset(test);
    if (train_parts.empty()) throw InputError("no clients to partition for");
    const std::size_t n_clients = train_parts.size();
    const std::size_t n_class = test.n_class;

    // train_counts[c][k] = points of class k+1 at client c
    std::vector<std::vector<std::size_t>> train_counts(
        n_clients, std::vector<std::size_t>(n_class, 0));
    for (std::size_t c = 0; c < n_clients; ++c) {
        for (int y : train_parts[c].labels) {
            if (y < 1 || static_cast<std::size_t>(y) > n_class) {
                throw InputError("training label outside the test label range");
            }
            ++train_counts[c][static_cast<std::size_t>(y) - 1];
        }
    }

    std::vector<std::vector<std::size_t>> test_by_class(n_class);
    for (std::size_t i = 0; i < test.size(); ++i) {
        test_by_class[static_cast<std::size_t>(test.labels[i]) - 1].push_back(i);
    }

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> assigned(n_clients);
    for (std::size_t k = 0; k < n_class; ++k) {
        auto& members = test_by_class[k];
        if (members.empty()) continue;
        std::size_t total_train = 0;
        for (std::size_t c = 0; c < n_clients; ++c) total_train += train_counts[c][k];
        rng.shuffle(members);
        if (total_train == 0) {
            // Nobody trains on this class; spread it evenly.
            for (std::size_t j = 0; j < members.size(); ++j) {
                assigned[j % n_clients].push_back(members[j]);
            }
            continue;
        }
        // Largest-remainder apportionment of this class's test points.
        std::vector<std::size_t> quota(n_clients, 0);
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t given = 0;
        for (std::size_t c = 0; c < n_clients; ++c) {
            const double exact = static_cast<double>(members.size()) *
                                 static_cast<double>(train_counts[c][k]) /
                                 static_cast<double>(total_train);
            quota[c] = static_cast<std::size_t>(exact);
            given += quota[c];
            remainders.push_back({exact - static_cast<double>(quota[c]), c});
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) {
                             return a.first > b.first;
                         });
        for (std::size_t j = 0; given < members.size(); ++j, ++given) {
            ++quota[remainders[j % n_clients].second];
        }
        std::size_t pos = 0;
        for (std::size_t c = 0; c < n_clients; ++c) {
            for (std::size_t j = 0; j < quota[c]; ++j) {
                assigned[c].push_back(members[pos++]);
            }
        }
    }

    std::vector<LabeledDataset> parts(n_clients);
    for (std::size_t c = 0; c < n_clients; ++c) {
        std::sort(assigned[c].begin(), assigned[c].end());
        parts[c] = select(test, assigned[c]);
    }
    return parts;
}

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) {
        throw ParseError("truncated magic", bytes.size());
    }
    const std::uint32_t magic = read_be_u32(bytes, 0);
    if (magic != 0x00000801u && magic != 0x00000803u) {
        throw ParseError("unsupported magic " + std::to_string(magic), 0);
    }
    const std::size_t ndim = magic & 0xffu;
    IdxTensor tensor;
    std::size_t offset = 4;
    std::size_t total = 1;
    for (std::size_t d = 0; d < ndim; ++d, offset += 4) {
        if (bytes.size() < offset + 4) {
            throw ParseError("truncated dimension header", bytes.size());
        }
        const std::uint32_t dim = read_be_u32(bytes, offset);
        if (dim == 0) throw ParseError("zero dimension", offset);
        if (total > SIZE_MAX / dim) {
            throw ParseError("dimension product overflow", offset);
        }
        total *= dim;
        tensor.shape.push_back(dim);
    }
    if (bytes.size() < offset + total) {
        throw ParseError("payload ends before " + std::to_string(total) +
                             " declared bytes",
                         bytes.size());
    }
    if (bytes.size() > offset + total) {
        throw ParseError("trailing bytes after payload", offset + total);
    }
    tensor.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                       bytes.end());
    return tensor;
}

std::vector<std::uint8_t> serialize_idx(const IdxTensor& tensor) {
    if (tensor.shape.size() != 1 && tensor.shape.size() != 3) {
        throw InputError("idx tensors must be 1-D labels or 3-D images");
    }
    std::size_t total = 1;
    for (std::uint32_t dim : tensor.shape) {
        if (dim == 0) throw InputError("idx dimensions must be positive");
        total *= dim;
    }
    if (tensor.data.size() != total) {
        throw InputError("idx payload size does not match shape");
    }
    std::vector<std::uint8_t> bytes;
    bytes.reserve(4 + 4 * tensor.shape.size() + tensor.data.size());
    append_be_u32(bytes, 0x00000800u |
                             static_cast<std::uint32_t>(tensor.shape.size()));
    for (std::uint32_t dim : tensor.shape) append_be_u32(bytes, dim);
    bytes.insert(bytes.end(), tensor.data.begin(), tensor.data.end());
    return bytes;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw InputError("read failed for " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("write failed for " + path.string());
}

LabeledDataset load_idx_dataset(const std::filesystem::path& images_path,
                                const std::filesystem::path& labels_path,
                                std::size_t n_class) {
    const IdxTensor images = parse_idx(read_file(images_path));
    const IdxTensor labels = parse_idx(read_file(labels_path));
    if (images.shape.size() != 3) {
        throw InputError(images_path.string() + " is not a 3-D image file");
    }
    if (labels.shape.size() != 1) {
        throw InputError(labels_path.string() + " is not a 1-D label file");
    }
    if (images.shape[0] != labels.shape[0]) {
        throw InputError("image count " + std::to_string(images.shape[0]) +
                         " does not match label count " +
                         std::to_string(labels.shape[0]));
    }
    const std::size_t n = images.shape[0];
    const std::size_t pixels =
        static_cast<std::size_t>(images.shape[1]) * images.shape[2];

    LabeledDataset data;
    data.inputs.reserve(n);
    data.labels.reserve(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(pixels);
        const std::uint8_t* src = images.data.data() + i * pixels;
        for (std::size_t j = 0; j < pixels; ++j) {
            x[j] = static_cast<double>(src[j]) / 255.0;
        }
        data.inputs.push_back(std::move(x));
        const int y = static_cast<int>(labels.data[i]) + 1;
        data.labels.push_back(y);
        max_label = std::max(max_label, y);
    }
    data.n_class = n_class == 0 ? static_cast<std::size_t>(max_label) : n_class;
    validate_dataset(data);
    return data;
}

}  // namespace fedlog
