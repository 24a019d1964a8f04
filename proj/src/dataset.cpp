#include "splitwiper/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "splitwiper/errors.hpp"
#include "splitwiper/rng.hpp"

namespace splitwiper {

Dataset gen_blobs(std::uint32_t class_count, std::size_t dims,
                  std::size_t samples_per_class, double spread,
                  std::uint64_t seed) {
    if (class_count < 1 || dims < 1 || samples_per_class < 1) {
        throw InvalidDimension("gen_blobs counts must be >= 1");
    }
    if (spread < 0.0) throw ConfigError("spread must be >= 0");

    SplitMix64 mean_rng(derive_seed(seed, streams::kBlobMeans));
    std::vector<std::vector<double>> means(class_count, std::vector<double>(dims));
    for (auto& mean : means) {
        double norm_sq = 0.0;
        for (double& v : mean) {
            v = mean_rng.next_normal();
            norm_sq += v * v;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm > 0.0) {
            for (double& v : mean) v = v / norm * 4.0;
        } else {
            mean[0] = 4.0;
        }
    }

    const std::size_t n = static_cast<std::size_t>(class_count) * samples_per_class;
    Dataset ds;
    ds.class_count = class_count;
    ds.features = Tensor(n, dims);
    ds.labels.reserve(n);
    SplitMix64 noise_rng(derive_seed(seed, streams::kBlobNoise));
    std::size_t row = 0;
    for (std::uint32_t c = 0; c < class_count; ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
            for (std::size_t d = 0; d < dims; ++d) {
                ds.features.at(row, d) = means[c][d] + spread * noise_rng.next_normal();
            }
            ds.labels.push_back(c);
        }
    }
    return ds;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& cell, std::size_t row) {
    const std::string t = trim(cell);
    double v = 0.0;
    const auto* begin = t.data();
    const auto* end = t.data() + t.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end || t.empty()) {
        throw ParseError("non-numeric cell '" + cell + "'", row);
    }
    return v;
}

long parse_label(const std::string& cell, std::size_t row) {
    const std::string t = trim(cell);
    long v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size() || t.empty()) {
        throw ParseError("non-integer label '" + cell + "'", row);
    }
    return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path.string(), 0);

    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty file", 1);
    const auto header = split_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == label_column) {
            label_idx = i;
            break;
        }
    }
    if (label_idx == header.size()) {
        throw ParseError("label column '" + label_column + "' not in header", 1);
    }

    Dataset ds;
    std::vector<double> values;
    std::size_t n = 0;
    std::size_t row_no = 1;
    long max_label = -1;
    while (std::getline(is, line)) {
        ++row_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()),
                             row_no);
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) {
                const long label = parse_label(cells[i], row_no);
                if (label < 0) throw ParseError("negative label", row_no);
                ds.labels.push_back(static_cast<std::uint32_t>(label));
                max_label = std::max(max_label, label);
            } else {
                values.push_back(parse_double(cells[i], row_no));
            }
        }
        ++n;
    }
    if (n == 0) throw ParseError("no data rows", row_no);
    ds.features = Tensor(n, header.size() - 1, std::move(values));
    ds.class_count = static_cast<std::uint32_t>(max_label + 1);
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing", 0);
    for (std::size_t d = 0; d < ds.dim(); ++d) os << "f" << d << ",";
    os << "label\n";
    char buf[64];
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (std::size_t d = 0; d < ds.dim(); ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", ds.features.at(r, d));
            os << buf << ",";
        }
        os << ds.labels[r] << "\n";
    }
}

}  // namespace splitwiper
