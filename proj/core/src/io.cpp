#include "fattnn/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "fattnn/error.hpp"

namespace fattnn {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kLoadingsVersion = 1;
constexpr std::uint32_t kMaxOrder = 64;

class Writer {
public:
    explicit Writer(std::string_view magic) { bytes_.insert(bytes_.end(), magic.begin(), magic.end()); }

    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(std::span<const double> v) {
        for (double x : v) f64(x);
    }
    Bytes take() { return std::move(bytes_); }

private:
    Bytes bytes_;
};

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

    void magic(std::string_view expected) {
        if (bytes_.size() < expected.size() ||
            !std::equal(expected.begin(), expected.end(), bytes_.begin())) {
            throw IoError(IoErrc::bad_magic, std::string(what_) + " does not start with \"" +
                                                 std::string(expected) + "\"");
        }
        pos_ = expected.size();
    }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<double> f64s(std::size_t count) {
        need_elements(count);
        std::vector<double> v(count);
        for (auto& x : v) x = f64();
        return v;
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    void need_elements(std::size_t count) const {
        if (count > remaining() / 8) short_payload(count * 8);
    }
    void finish() const {
        if (remaining() != 0) {
            throw IoError(IoErrc::payload_length_mismatch,
                          std::string(what_) + " has " + std::to_string(remaining()) +
                              " trailing bytes beyond the declared payload");
        }
    }

    void dtype_and_version(std::uint32_t version) {
        const std::uint32_t dtype = u32();
        if (dtype == 0x01000000u) {
            throw IoError(IoErrc::foreign_endian,
                          std::string(what_) + " was written with the opposite byte order");
        }
        if (dtype != kDtypeF64) {
            throw IoError(IoErrc::unsupported_dtype,
                          std::string(what_) + " has dtype code " + std::to_string(dtype) +
                              " (only 1 = f64 is supported)");
        }
        const std::uint32_t v = u32();
        if (v != version) {
            throw IoError(IoErrc::unsupported_version,
                          std::string(what_) + " has version " + std::to_string(v) +
                              ", this build reads version " + std::to_string(version));
        }
    }

    Shape shape(std::uint32_t order) {
        if (order > kMaxOrder) {
            throw IoError(IoErrc::dim_inconsistency,
                          std::string(what_) + " declares order " + std::to_string(order));
        }
        Shape s(order);
        for (auto& d : s) {
            d = u64();
            if (d == 0) throw IoError(IoErrc::dim_inconsistency, std::string(what_) + " has a zero extent");
        }
        return s;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) short_payload(n);
    }
    [[noreturn]] void short_payload(std::size_t n) const {
        throw IoError(IoErrc::payload_length_mismatch,
                      std::string(what_) + " is truncated: needed " + std::to_string(n) +
                          " more bytes at offset " + std::to_string(pos_) + ", found " +
                          std::to_string(remaining()));
    }

    std::span<const std::uint8_t> bytes_;
    const char* what_;
    std::size_t pos_ = 0;
};

/// prod(shape) * n, or dim_inconsistency on overflow.
std::size_t checked_count(const Shape& shape, std::uint64_t n, const char* what) {
    std::uint64_t total = n;
    for (auto d : shape) {
        if (d != 0 && total > std::numeric_limits<std::uint64_t>::max() / d) {
            throw IoError(IoErrc::dim_inconsistency, std::string(what) + " dims overflow");
        }
        total *= d;
    }
    return static_cast<std::size_t>(total);
}

void put_shape(Writer& w, const Shape& s) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    for (auto d : s) w.u64(d);
}

std::string fmt(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

std::string fmt_ms(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    return buf;
}

}  // namespace

Bytes read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrc::open_failed, "cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(IoErrc::write_failed, "short write to " + path.string());
}

Bytes encode_series(const SeriesPair& data) {
    const auto& x = data.covariates;
    const auto& y = data.responses;
    if (x.shape().empty()) throw ShapeError("series file needs covariates of order >= 1");
    const bool has_y = !y.empty();
    if (has_y && y.shape().empty()) {
        throw ShapeError("series file stores scalar responses as shape (1)");
    }
    if (has_y && y.length() != x.length()) {
        throw ShapeError("covariate and response series differ in length");
    }
    Writer w("FATT");
    w.u32(kDtypeF64);
    w.u32(kSeriesVersion);
    put_shape(w, x.shape());
    put_shape(w, has_y ? y.shape() : Shape{});
    w.u64(x.length());
    for (const auto& slice : x) w.f64s(slice.data());
    if (has_y)
        for (const auto& slice : y) w.f64s(slice.data());
    return w.take();
}

SeriesPair decode_series(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "series file");
    r.magic("FATT");
    r.dtype_and_version(kSeriesVersion);
    const Shape dims = r.shape(r.u32());
    if (dims.empty()) throw IoError(IoErrc::dim_inconsistency, "series file has order-0 covariates");
    const Shape pdims = r.shape(r.u32());
    const std::uint64_t n = r.u64();
    const std::size_t nx = checked_count(dims, n, "series file");
    const std::size_t ny = pdims.empty() ? 0 : checked_count(pdims, n, "series file");
    if (nx + ny < nx) throw IoError(IoErrc::dim_inconsistency, "series file dims overflow");
    r.need_elements(nx + ny);

    SeriesPair out{TensorSeries(dims), TensorSeries(pdims)};
    const std::size_t sx = num_elements(dims);
    for (std::uint64_t t = 0; t < n; ++t) out.covariates.push_back(Tensor(dims, r.f64s(sx)));
    if (!pdims.empty()) {
        const std::size_t sy = num_elements(pdims);
        for (std::uint64_t t = 0; t < n; ++t) out.responses.push_back(Tensor(pdims, r.f64s(sy)));
    }
    r.finish();
    return out;
}

void write_series(const std::filesystem::path& path, const SeriesPair& data) {
    write_bytes(path, encode_series(data));
}

SeriesPair read_series(const std::filesystem::path& path) { return decode_series(read_bytes(path)); }

Bytes encode_checkpoint(const TcnModel& model) {
    const auto& c = model.config;
    Writer w("FTCN");
    w.u32(kDtypeF64);
    w.u32(kCheckpointVersion);
    w.u64(c.input_width);
    w.u64(c.output_width);
    w.u32(static_cast<std::uint32_t>(c.channels.size()));
    for (auto ch : c.channels) w.u64(ch);
    w.u64(c.kernel_size);
    if (c.dilations.size() != c.channels.size()) {
        throw ConfigError("checkpoint needs one dilation per block");
    }
    for (auto d : c.dilations) w.u64(d);
    w.u32(c.activation == Activation::relu ? 0 : 1);
    w.f64(c.dropout);
    w.f64(c.learning_rate);
    w.u64(c.epochs);
    w.u64(c.batch_length);
    w.u64(c.patience);
    w.f64(c.validation_fraction);
    w.u64(c.seed);
    w.u8(c.use_lagged_response ? 1 : 0);
    w.u8(c.standardize ? 1 : 0);
    w.u64(c.min_history);
    put_shape(w, model.response_shape);
    w.u64(model.weights.size());
    w.f64s(model.weights);
    w.f64s(model.input_mean);
    w.f64s(model.input_scale);
    w.f64s(model.output_mean);
    w.f64s(model.output_scale);
    return w.take();
}

TcnModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "checkpoint");
    r.magic("FTCN");
    r.dtype_and_version(kCheckpointVersion);
    TcnModel m;
    auto& c = m.config;
    c.input_width = r.u64();
    c.output_width = r.u64();
    const std::uint32_t blocks = r.u32();
    if (blocks > 4096) throw IoError(IoErrc::dim_inconsistency, "checkpoint declares " + std::to_string(blocks) + " blocks");
    c.channels.resize(blocks);
    for (auto& ch : c.channels) ch = r.u64();
    c.kernel_size = r.u64();
    c.dilations.resize(blocks);
    for (auto& d : c.dilations) d = r.u64();
    const std::uint32_t act = r.u32();
    if (act > 1) throw IoError(IoErrc::dim_inconsistency, "checkpoint has activation code " + std::to_string(act));
    c.activation = act == 0 ? Activation::relu : Activation::linear;
    c.dropout = r.f64();
    c.learning_rate = r.f64();
    c.epochs = r.u64();
    c.batch_length = r.u64();
    c.patience = r.u64();
    c.validation_fraction = r.f64();
    c.seed = r.u64();
    c.use_lagged_response = r.u8() != 0;
    c.standardize = r.u8() != 0;
    c.min_history = r.u64();
    m.response_shape = r.shape(r.u32());
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw IoError(IoErrc::dim_inconsistency, std::string("checkpoint config: ") + e.what());
    }
    if (num_elements(m.response_shape) != c.output_width) {
        throw IoError(IoErrc::dim_inconsistency, "checkpoint response shape " +
                                                     to_string(m.response_shape) +
                                                     " does not match output width " +
                                                     std::to_string(c.output_width));
    }
    const std::uint64_t count = r.u64();
    if (count != parameter_count(c)) {
        throw IoError(IoErrc::dim_inconsistency,
                      "checkpoint holds " + std::to_string(count) + " weights, the architecture needs " +
                          std::to_string(parameter_count(c)));
    }
    m.weights = r.f64s(count);
    m.input_mean = r.f64s(c.input_width);
    m.input_scale = r.f64s(c.input_width);
    m.output_mean = r.f64s(c.output_width);
    m.output_scale = r.f64s(c.output_width);
    r.finish();
    return m;
}

void save_checkpoint(const std::filesystem::path& path, const TcnModel& model) {
    write_bytes(path, encode_checkpoint(model));
}

TcnModel load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(read_bytes(path));
}

Bytes encode_loadings(const LoadingSet& loadings) {
    Writer w("FATL");
    w.u32(kDtypeF64);
    w.u32(kLoadingsVersion);
    w.u32(static_cast<std::uint32_t>(loadings.order()));
    for (const auto& a : loadings.loadings) {
        w.u64(a.rows());
        w.u64(a.cols());
        w.f64s(a.data());
    }
    return w.take();
}

LoadingSet decode_loadings(std::span<const std::uint8_t> bytes) {
    Reader r(bytes, "loadings file");
    r.magic("FATL");
    r.dtype_and_version(kLoadingsVersion);
    const std::uint32_t order = r.u32();
    if (order == 0 || order > kMaxOrder) {
        throw IoError(IoErrc::dim_inconsistency, "loadings file declares order " + std::to_string(order));
    }
    LoadingSet out;
    for (std::uint32_t k = 0; k < order; ++k) {
        const std::uint64_t d = r.u64();
        const std::uint64_t rk = r.u64();
        if (d == 0 || rk == 0 || rk > d) {
            throw IoError(IoErrc::dim_inconsistency, "loadings mode " + std::to_string(k) +
                                                         " is " + std::to_string(d) + " x " +
                                                         std::to_string(rk));
        }
        const std::size_t count = checked_count(Shape{d, rk}, 1, "loadings file");
        out.loadings.emplace_back(d, rk, r.f64s(count));
    }
    r.finish();
    return out;
}

void save_loadings(const std::filesystem::path& path, const LoadingSet& loadings) {
    write_bytes(path, encode_loadings(loadings));
}

LoadingSet load_loadings(const std::filesystem::path& path) {
    return decode_loadings(read_bytes(path));
}

void write_report(std::ostream& out, const ExperimentReport& rep) {
    std::string ranks;
    for (std::size_t i = 0; i < rep.ranks.size(); ++i) {
        if (i) ranks += ',';
        ranks += std::to_string(rep.ranks[i]);
    }
    out << "method = " << rep.method << '\n'
        << "test_mse = " << fmt(rep.test_mse) << '\n'
        << "ci_lo = " << fmt(rep.ci.lo) << '\n'
        << "ci_hi = " << fmt(rep.ci.hi) << '\n'
        << "ci_replications = " << rep.ci.replications << '\n'
        << "seconds_factorize = " << fmt_ms(rep.seconds.factorize) << '\n'
        << "seconds_train = " << fmt_ms(rep.seconds.train) << '\n'
        << "seconds_forecast = " << fmt_ms(rep.seconds.forecast) << '\n'
        << "seconds_total = " << fmt_ms(rep.seconds.total()) << '\n'
        << "input_width = " << rep.input_width << '\n'
        << "n_train = " << rep.n_train << '\n'
        << "n_test = " << rep.n_test << '\n'
        << "ranks = " << (ranks.empty() ? "none" : ranks) << '\n'
        << "seed = " << rep.seed << '\n'
        << "initial_train_loss = " << fmt(rep.initial_train_loss) << '\n'
        << "final_train_loss = " << fmt(rep.final_train_loss) << '\n'
        << "epochs_run = " << rep.epochs_run << '\n';
    for (const auto& [k, v] : rep.config_echo) out << "config." << k << " = " << v << '\n';
}

std::string report_text(const ExperimentReport& report) {
    std::ostringstream os;
    write_report(os, report);
    return os.str();
}

std::vector<std::pair<std::string, std::string>> parse_report(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> out;
    auto trim = [](std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return std::string_view{};
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw DataError("report line " + std::to_string(line_no) + " is not key = value");
        }
        out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }
    return out;
}

void write_predictions_csv(std::ostream& out, const ExperimentReport& report) {
    if (report.observed.length() != report.predictions.length()) {
        throw ShapeError("observed and predicted series differ in length");
    }
    out << "step,entry,observed,predicted\n";
    for (std::size_t t = 0; t < report.predictions.length(); ++t) {
        const auto& y = report.observed[t];
        const auto& p = report.predictions[t];
        for (std::size_t j = 0; j < p.size(); ++j) {
            out << t << ',' << j << ',' << fmt(y[j]) << ',' << fmt(p[j]) << '\n';
        }
    }
}

}  // namespace fattnn
