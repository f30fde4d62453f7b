#include "mvtensor/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

namespace mvtensor {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMvbMagic{'M', 'V', 'B', '1'};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

void put_u32(std::string &out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint32_t get_u32(const std::string &in, std::size_t at) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
    return v;
}

void put_f64(std::string &out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(const std::string &in, std::size_t at) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

fs::path resolve(const fs::path &base, const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

void verify_checksum(const fs::path &path, const std::string &expected, const std::string &what) {
    if (expected.empty()) return;
    const std::string actual = sha256_file(path);
    std::string lowered = expected;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (actual != lowered)
        throw FormatError("checksum mismatch for " + what + " (" + path.string() + "): expected " +
                          lowered + ", got " + actual);
}

} // namespace

MatrixFormat parse_matrix_format(const std::string &s) {
    if (s == "csv") return MatrixFormat::Csv;
    if (s == "mvb") return MatrixFormat::Mvb;
    throw ValidationError("unknown matrix format '" + s + "' (expected csv or mvb)");
}

std::string to_string(MatrixFormat f) { return f == MatrixFormat::Mvb ? "mvb" : "csv"; }

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("failed reading " + path.string());
    return ss.str();
}

void write_file_atomic(const fs::path &path, const std::string &content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string());
}

std::string matrix_to_csv(const Matrix &m) {
    std::string out;
    std::array<char, 32> buf;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out.push_back(',');
            auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), m(i, j));
            out.append(buf.data(), end);
        }
        out.push_back('\n');
    }
    return out;
}

Matrix matrix_from_csv(const std::string &text, const std::string &origin) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = trim(line);
        if (body.empty()) continue;
        std::vector<double> row;
        std::size_t col = 0, start = 0;
        while (true) {
            ++col;
            const std::size_t comma = body.find(',', start);
            const std::string_view cell =
                trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
            double value = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
                throw FormatError(origin + ": non-numeric cell '" + std::string(cell) + "' at row " +
                                  std::to_string(line_no) + ", column " + std::to_string(col));
            if (!std::isfinite(value))
                throw FormatError(origin + ": non-finite value at row " + std::to_string(line_no) +
                                  ", column " + std::to_string(col));
            row.push_back(value);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError(origin + ": row " + std::to_string(line_no) + " has " +
                              std::to_string(row.size()) + " columns, expected " +
                              std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError(origin + ": CSV has zero rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

Matrix load_matrix(const fs::path &path, MatrixFormat format) {
    const std::string bytes = read_file(path);
    if (format == MatrixFormat::Csv) return matrix_from_csv(bytes, path.string());

    if (bytes.size() < 12 || !std::equal(kMvbMagic.begin(), kMvbMagic.end(), bytes.begin()))
        throw FormatError(path.string() + ": not an MVB1 file (bad magic)");
    const std::uint32_t rows = get_u32(bytes, 4), cols = get_u32(bytes, 8);
    const std::size_t expected = 12 + std::size_t{rows} * cols * 8;
    if (bytes.size() < expected)
        throw FormatError(path.string() + ": truncated payload (" + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expected) + ")");
    if (bytes.size() > expected) throw FormatError(path.string() + ": trailing bytes after payload");
    if (rows == 0) throw FormatError(path.string() + ": matrix has zero rows");
    Matrix m(rows, cols);
    std::size_t at = 12;
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j, at += 8) {
            m(i, j) = get_f64(bytes, at);
            if (!std::isfinite(m(i, j)))
                throw FormatError(path.string() + ": non-finite value at row " +
                                  std::to_string(i + 1) + ", column " + std::to_string(j + 1));
        }
    return m;
}

void save_matrix(const fs::path &path, MatrixFormat format, const Matrix &m) {
    if (format == MatrixFormat::Csv) {
        write_file_atomic(path, matrix_to_csv(m));
        return;
    }
    std::string out(kMvbMagic.begin(), kMvbMagic.end());
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    write_file_atomic(path, out);
}

LabelVector load_labels(const fs::path &path) {
    const Matrix m = load_matrix(path, MatrixFormat::Csv);
    if (m.cols() != 1) throw FormatError(path.string() + ": labels file must have one column");
    std::vector<int> labels(static_cast<std::size_t>(m.rows()));
    for (Index i = 0; i < m.rows(); ++i) {
        const double v = m(i, 0);
        if (v != std::floor(v) || v < 0)
            throw FormatError(path.string() + ": label at row " + std::to_string(i + 1) +
                              " is not a nonnegative integer");
        labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
    }
    return LabelVector(std::move(labels));
}

void save_labels(const fs::path &path, const LabelVector &labels) {
    std::string out;
    for (int l : labels.values()) out += std::to_string(l) + "\n";
    write_file_atomic(path, out);
}

std::string sha256_file(const fs::path &path) {
    const std::string bytes = read_file(path);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 computation failed for " + path.string());
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

Manifest Manifest::parse(const std::string &json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("malformed manifest JSON: ") + e.what());
    }
    Manifest m;
    try {
        m.name = j.value("name", std::string("dataset"));
        m.n_samples = j.at("n_samples").get<Index>();
        for (const auto &v : j.at("views")) {
            ManifestView view;
            view.name = v.value("name", "view" + std::to_string(m.views.size()));
            view.path = v.at("path").get<std::string>();
            view.dim = v.at("dim").get<Index>();
            view.format = parse_matrix_format(v.value("format", std::string("csv")));
            view.checksum = v.value("checksum", std::string());
            m.views.push_back(std::move(view));
        }
        m.labels_path = j.value("labels_path", std::string());
        m.labels_checksum = j.value("labels_checksum", std::string());
    } catch (const nlohmann::json::exception &e) {
        throw FormatError(std::string("manifest is missing or mistypes a field: ") + e.what());
    }
    if (m.views.empty()) throw ValidationError("manifest lists no views");
    if (m.n_samples < 2) throw ValidationError("manifest n_samples must be at least 2");
    return m;
}

std::string Manifest::to_json() const {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["n_samples"] = n_samples;
    j["views"] = nlohmann::ordered_json::array();
    for (const auto &v : views) {
        nlohmann::ordered_json e;
        e["name"] = v.name;
        e["path"] = v.path;
        e["dim"] = v.dim;
        e["format"] = to_string(v.format);
        if (!v.checksum.empty()) e["checksum"] = v.checksum;
        j["views"].push_back(std::move(e));
    }
    if (!labels_path.empty()) j["labels_path"] = labels_path;
    if (!labels_checksum.empty()) j["labels_checksum"] = labels_checksum;
    return j.dump(2) + "\n";
}

MultiViewDataset load_manifest(const fs::path &path) {
    const Manifest m = Manifest::parse(read_file(path));
    const fs::path base = path.parent_path();
    MultiViewDataset d;
    d.name = m.name;
    for (const auto &v : m.views) {
        const fs::path file = resolve(base, v.path);
        if (!fs::exists(file)) throw IoError("view '" + v.name + "': missing file " + file.string());
        verify_checksum(file, v.checksum, "view '" + v.name + "'");
        Matrix values = load_matrix(file, v.format);
        if (values.cols() != v.dim)
            throw ValidationError("view '" + v.name + "': declared dim " + std::to_string(v.dim) +
                                  " but file has " + std::to_string(values.cols()) + " columns");
        if (values.rows() != m.n_samples)
            throw ValidationError("view '" + v.name + "': declared " +
                                  std::to_string(m.n_samples) + " samples but file has " +
                                  std::to_string(values.rows()) + " rows");
        d.views.emplace_back(std::move(values));
    }
    if (!m.labels_path.empty()) {
        const fs::path file = resolve(base, m.labels_path);
        if (!fs::exists(file)) throw IoError("missing labels file " + file.string());
        verify_checksum(file, m.labels_checksum, "labels");
        d.labels = load_labels(file);
    }
    d.validate();
    return d;
}

fs::path save_dataset(const fs::path &dir, const MultiViewDataset &d, MatrixFormat format) {
    d.validate();
    Manifest m;
    m.name = d.name;
    m.n_samples = d.samples();
    for (std::size_t v = 0; v < d.views.size(); ++v) {
        ManifestView view;
        view.name = "view" + std::to_string(v);
        view.path = "view_" + std::to_string(v) + "." + to_string(format);
        view.dim = d.views[v].dim();
        view.format = format;
        save_matrix(dir / view.path, format, d.views[v].values());
        view.checksum = sha256_file(dir / view.path);
        m.views.push_back(std::move(view));
    }
    if (d.labels) {
        m.labels_path = "labels.csv";
        save_labels(dir / m.labels_path, *d.labels);
        m.labels_checksum = sha256_file(dir / m.labels_path);
    }
    const fs::path manifest = dir / "manifest.json";
    write_file_atomic(manifest, m.to_json());
    return manifest;
}

MultiViewDataset make_synthetic_blobs(const BlobSpec &spec) {
    if (spec.n_per_cluster < 1 || spec.clusters < 1 || spec.dims.empty())
        throw ValidationError("synthetic blobs need positive counts and at least one view");
    if (spec.noise_sigmas.size() != spec.dims.size())
        throw ValidationError("one noise sigma is required per view");
    const Index n = spec.n_per_cluster * spec.clusters;
    if (n < 2) throw ValidationError("synthetic blobs need at least 2 samples");

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i / spec.n_per_cluster);
    std::shuffle(labels.begin(), labels.end(), rng);

    MultiViewDataset d;
    d.name = "synthetic-blobs";
    for (std::size_t v = 0; v < spec.dims.size(); ++v) {
        const Index dim = spec.dims[v];
        if (dim < 1) throw ValidationError("view dimensions must be positive");
        Matrix centers(spec.clusters, dim);
        for (Index c = 0; c < spec.clusters; ++c)
            for (Index j = 0; j < dim; ++j) centers(c, j) = gauss(rng);
        Matrix x(n, dim);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < dim; ++j)
                x(i, j) = centers(labels[static_cast<std::size_t>(i)], j) +
                          spec.noise_sigmas[v] * gauss(rng);
        d.views.emplace_back(std::move(x));
    }
    d.labels = LabelVector(std::move(labels));
    return d;
}

} // namespace mvtensor
