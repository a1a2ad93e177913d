#include "grownet/data.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace grownet {

namespace {

bool is_gzip(const std::filesystem::path& path) {
    const std::string s = path.string();
    return s.size() >= 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

std::string read_all(const std::filesystem::path& path) {
    if (is_gzip(path)) {
        gzFile f = gzopen(path.string().c_str(), "rb");
        if (!f) throw IoError("cannot open " + path.string());
        std::string out;
        char buf[1 << 15];
        int n = 0;
        while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
        const bool failed = n < 0;
        gzclose(f);
        if (failed) throw IoError("gzip read failed for " + path.string());
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_all(const std::filesystem::path& path, const std::string& text) {
    if (is_gzip(path)) {
        gzFile f = gzopen(path.string().c_str(), "wb");
        if (!f) throw IoError("cannot write " + path.string());
        const int n = gzwrite(f, text.data(), static_cast<unsigned>(text.size()));
        gzclose(f);
        if (n != static_cast<int>(text.size())) throw IoError("gzip write failed for " + path.string());
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

Dataset Dataset::select(std::span<const std::size_t> indices) const {
    Dataset out;
    out.name = name;
    out.stats = stats;
    out.inputs = Matrix(indices.size(), input_dim());
    out.labels = Matrix(indices.size(), output_dim());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src_in = inputs.row(indices[i]);
        auto src_lab = labels.row(indices[i]);
        std::copy(src_in.begin(), src_in.end(), out.inputs.row(i).begin());
        std::copy(src_lab.begin(), src_lab.end(), out.labels.row(i).begin());
    }
    return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < end && i < size(); ++i) idx.push_back(i);
    return select(idx);
}

Dataset load_csv(const std::filesystem::path& path, std::size_t n0, std::size_t nT) {
    const std::string text = read_all(path);
    const std::size_t width = n0 + nT;

    std::vector<double> in_vals;
    std::vector<double> lab_vals;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    bool header_seen = false;

    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;

        auto fields = split_fields(line);
        if (!header_seen) {
            if (fields.size() != width) throw SchemaError("header has " + std::to_string(fields.size()) +
                                                              " columns, expected " + std::to_string(width),
                                                          line_no);
            for (std::size_t i = 0; i < width; ++i) {
                const std::string expected =
                    i < n0 ? "x" + std::to_string(i) : "y" + std::to_string(i - n0);
                if (trim(fields[i]) != expected)
                    throw SchemaError("header column " + std::to_string(i) + " is '" +
                                          std::string(trim(fields[i])) + "', expected '" + expected + "'",
                                      line_no);
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != width)
            throw SchemaError("row has " + std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(width),
                              line_no);
        for (std::size_t i = 0; i < width; ++i) {
            const auto f = trim(fields[i]);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || f.empty())
                throw SchemaError("non-numeric cell '" + std::string(f) + "' in column " + std::to_string(i),
                                  line_no);
            if (!std::isfinite(v)) throw SchemaError("non-finite cell in column " + std::to_string(i), line_no);
            (i < n0 ? in_vals : lab_vals).push_back(v);
        }
        ++rows;
    }
    if (!header_seen) throw SchemaError("missing header", line_no == 0 ? 1 : line_no);
    if (rows == 0) throw SchemaError("no data rows", line_no);

    Dataset d;
    d.name = path.filename().string();
    d.inputs = Matrix(rows, n0, std::move(in_vals));
    d.labels = Matrix(rows, nT, std::move(lab_vals));
    return d;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
    std::string out;
    const std::size_t n0 = data.input_dim();
    const std::size_t nT = data.output_dim();
    for (std::size_t i = 0; i < n0 + nT; ++i) {
        if (i) out += ',';
        out += i < n0 ? "x" + std::to_string(i) : "y" + std::to_string(i - n0);
    }
    out += '\n';
    char buf[64];
    for (std::size_t r = 0; r < data.size(); ++r) {
        for (std::size_t i = 0; i < n0 + nT; ++i) {
            if (i) out += ',';
            const double v = i < n0 ? data.inputs(r, i) : data.labels(r, i - n0);
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += buf;
        }
        out += '\n';
    }
    write_all(path, out);
}

StandardizeResult standardize(const Dataset& train, std::span<const Dataset> others) {
    if (train.size() == 0) throw std::invalid_argument("standardize: empty training split");
    const std::size_t d = train.input_dim();
    const double s = static_cast<double>(train.size());

    StandardizeResult res;
    res.stats.mean.assign(d, 0.0);
    res.stats.stddev.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < train.size(); ++r) mean += train.inputs(r, j);
        mean /= s;
        double var = 0.0;
        for (std::size_t r = 0; r < train.size(); ++r) {
            const double c = train.inputs(r, j) - mean;
            var += c * c;
        }
        var /= s;
        res.stats.mean[j] = mean;
        if (var > 0.0) {
            res.stats.stddev[j] = std::sqrt(var);
        } else {
            // Constant column: left unchanged.
            res.stats.mean[j] = 0.0;
            res.warnings.push_back("feature x" + std::to_string(j) +
                                   " has zero variance; left unscaled");
        }
    }

    auto transform = [&](const Dataset& src) {
        if (src.input_dim() != d) throw std::invalid_argument("standardize: input dimension mismatch");
        Dataset out = src;
        out.inputs = apply_normalization(src.inputs, res.stats);
        out.stats = res.stats;
        return out;
    };
    res.train = transform(train);
    for (const auto& o : others) res.others.push_back(transform(o));
    return res;
}

Matrix apply_normalization(const Matrix& inputs, const NormalizationStats& stats) {
    Matrix out = inputs;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(r, j) = (inputs(r, j) - stats.mean[j]) / stats.stddev[j];
    return out;
}

Matrix invert_normalization(const Matrix& inputs, const NormalizationStats& stats) {
    Matrix out = inputs;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(r, j) = inputs(r, j) * stats.stddev[j] + stats.mean[j];
    return out;
}

Dataset gen_gaussian_regression(std::uint64_t seed, std::size_t samples, std::size_t n0,
                                std::size_t nT, const TeacherOptions& teacher) {
    Rng teacher_rng = Rng(seed).fork(1);
    Rng sample_rng = Rng(seed).fork(2);

    const std::size_t h = teacher.hidden;
    Matrix w(h, n0), v(nT, h);
    std::vector<double> b(h);
    const double in_scale = teacher.weight_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(n0, 1)));
    const double out_scale = teacher.weight_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(h, 1)));
    for (double& x : w.data()) x = in_scale * teacher_rng.normal();
    for (double& x : b) x = 0.1 * teacher.weight_scale * teacher_rng.normal();
    for (double& x : v.data()) x = out_scale * teacher_rng.normal();

    Dataset d;
    d.name = "gaussian-regression";
    d.inputs = Matrix(samples, n0);
    d.labels = Matrix(samples, nT);
    std::vector<double> hidden(h);
    for (std::size_t s = 0; s < samples; ++s) {
        for (double& x : d.inputs.row(s)) x = sample_rng.normal();
        for (std::size_t k = 0; k < h; ++k) hidden[k] = std::tanh(dot(w.row(k), d.inputs.row(s)) + b[k]);
        for (std::size_t o = 0; o < nT; ++o) {
            d.labels(s, o) = dot(v.row(o), hidden);
            if (teacher.noise > 0.0) d.labels(s, o) += teacher.noise * sample_rng.normal();
        }
    }
    return d;
}

}  // namespace grownet
