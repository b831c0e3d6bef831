#include "lddm/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <vector>

#include "lddm/error.hpp"

namespace lddm::io {

namespace fs = std::filesystem;

// ---- generic file helpers ------------------------------------------------

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw Error(ErrorKind::io, "read failed for '" + path.string() + "'");
    }
    return bytes;
}

void write_file(const fs::path &path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
    }
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <class T>
bool parse_number(std::string_view text, T &out) {
    text = trim(text);
    if (text.empty()) {
        return false;
    }
    if (text.front() == '+') {
        text.remove_prefix(1);
    }
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

// ---- PGM -----------------------------------------------------------------

class PgmCursor {
public:
    explicit PgmCursor(std::string_view bytes) : bytes_(bytes) {}

    // Next whitespace-delimited header token, skipping '#' comments.
    std::string_view token() {
        for (;;) {
            while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
                ++pos_;
            }
            if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
                continue;
            }
            break;
        }
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
            ++pos_;
        }
        return bytes_.substr(start, pos_ - start);
    }

    long header_int(const char *what) {
        long v = 0;
        const auto tok = token();
        if (!parse_number(tok, v)) {
            throw Error(ErrorKind::malformed_header, std::string("pgm: bad ") + what + " '" + std::string(tok) + "'");
        }
        return v;
    }

    std::size_t pos() const noexcept { return pos_; }
    void advance(std::size_t n) noexcept { pos_ += n; }
    std::string_view bytes() const noexcept { return bytes_; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

Image parse_pgm(std::string_view bytes, double spacing) {
    PgmCursor cur(bytes);
    const auto magic = cur.token();
    if (magic != "P2" && magic != "P5") {
        throw Error(ErrorKind::malformed_header, "pgm: expected P2 or P5 magic");
    }
    const long width = cur.header_int("width");
    const long height = cur.header_int("height");
    const long maxval = cur.header_int("maxval");
    if (width < 2 || height < 2 || width > 1 << 16 || height > 1 << 16) {
        throw Error(ErrorKind::malformed_header, "pgm: unsupported dimensions");
    }
    if (maxval < 1 || maxval > 65535) {
        throw Error(ErrorKind::malformed_header, "pgm: maxval must lie in [1, 65535]");
    }
    const Grid2D grid(static_cast<int>(width), static_cast<int>(height), spacing);
    std::vector<double> data(grid.size());
    const double scale = 1.0 / static_cast<double>(maxval);

    if (magic == "P2") {
        for (auto &v : data) {
            const auto tok = cur.token();
            if (tok.empty()) {
                throw Error(ErrorKind::truncated_payload, "pgm: fewer samples than declared");
            }
            long sample = 0;
            if (!parse_number(tok, sample) || sample < 0 || sample > maxval) {
                throw Error(ErrorKind::malformed_header, "pgm: bad sample '" + std::string(tok) + "'");
            }
            v = static_cast<double>(sample) * scale;
        }
        return Image(grid, std::move(data));
    }

    // P5: exactly one whitespace byte separates maxval from the raster.
    if (cur.pos() >= bytes.size()) {
        throw Error(ErrorKind::truncated_payload, "pgm: missing raster");
    }
    cur.advance(1);
    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    const std::size_t needed = grid.size() * bytes_per_sample;
    if (bytes.size() - cur.pos() < needed) {
        throw Error(ErrorKind::truncated_payload, "pgm: raster has " + std::to_string(bytes.size() - cur.pos()) +
                                                      " bytes, expected " + std::to_string(needed));
    }
    const auto *raster = reinterpret_cast<const unsigned char *>(bytes.data() + cur.pos());
    for (std::size_t k = 0; k < data.size(); ++k) {
        unsigned sample = raster[k * bytes_per_sample];
        if (bytes_per_sample == 2) {
            sample = (sample << 8) | raster[k * 2 + 1];
        }
        if (sample > static_cast<unsigned>(maxval)) {
            throw Error(ErrorKind::malformed_header, "pgm: sample exceeds maxval");
        }
        data[k] = static_cast<double>(sample) * scale;
    }
    return Image(grid, std::move(data));
}

Image read_pgm(const fs::path &path, double spacing) { return parse_pgm(read_file(path), spacing); }

std::string encode_pgm(const Image &img) {
    const Grid2D &g = img.grid();
    std::string out = "P5\n" + std::to_string(g.width()) + " " + std::to_string(g.height()) + "\n255\n";
    out.reserve(out.size() + g.size());
    for (double v : img.data()) {
        const double scaled = std::clamp(v, 0.0, 1.0) * 255.0;
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::ceil(scaled - 0.5))));
    }
    return out;
}

void write_pgm(const fs::path &path, const Image &img) { write_file(path, encode_pgm(img)); }

// ---- field files ---------------------------------------------------------

namespace {

constexpr std::string_view field_magic = "LFM1\n";

struct FieldHeader {
    int width = 0;
    int height = 0;
    double spacing = 0.0;
    int components = 0;
    std::size_t payload_offset = 0;
};

FieldHeader parse_field_header(std::string_view bytes) {
    if (bytes.substr(0, field_magic.size()) != field_magic) {
        throw Error(ErrorKind::bad_magic, "field: missing LFM1 magic");
    }
    std::size_t pos = field_magic.size();
    const auto next_line = [&]() -> std::string_view {
        const auto end = bytes.find('\n', pos);
        if (end == std::string_view::npos) {
            throw Error(ErrorKind::malformed_header, "field: header ends prematurely");
        }
        const auto line = bytes.substr(pos, end - pos);
        pos = end + 1;
        return line;
    };
    const auto keyed = [&](std::string_view key) {
        const auto line = next_line();
        if (line.substr(0, key.size()) != key || line.size() == key.size()) {
            throw Error(ErrorKind::malformed_header, "field: expected '" + std::string(key) + "<value>'");
        }
        return line.substr(key.size());
    };
    FieldHeader h;
    if (!parse_number(keyed("width="), h.width) || !parse_number(keyed("height="), h.height) ||
        !parse_number(keyed("spacing="), h.spacing) || !parse_number(keyed("components="), h.components)) {
        throw Error(ErrorKind::malformed_header, "field: unparsable header value");
    }
    if (next_line() != "data:") {
        throw Error(ErrorKind::malformed_header, "field: expected 'data:'");
    }
    if (h.width < 2 || h.height < 2 || !(h.spacing > 0.0) || (h.components != 1 && h.components != 2)) {
        throw Error(ErrorKind::malformed_header, "field: header values out of range");
    }
    h.payload_offset = pos;
    const std::size_t expected =
        static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height) * h.components * 4;
    const std::size_t actual = bytes.size() - pos;
    if (actual < expected) {
        throw Error(ErrorKind::truncated_payload, "field: payload has " + std::to_string(actual) + " bytes, expected " +
                                                      std::to_string(expected));
    }
    if (actual > expected) {
        throw Error(ErrorKind::header_mismatch, "field: payload longer than the header declares");
    }
    return h;
}

float load_le_float(const char *p) noexcept {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) {
        bits = (bits << 8) | static_cast<unsigned char>(p[b]);
    }
    return std::bit_cast<float>(bits);
}

void store_le_float(std::string &out, float value) {
    auto bits = std::bit_cast<std::uint32_t>(value);
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<char>(bits & 0xFFu));
        bits >>= 8;
    }
}

std::string encode_header(const Grid2D &g, int components) {
    return std::string(field_magic) + "width=" + std::to_string(g.width()) + "\nheight=" +
           std::to_string(g.height()) + "\nspacing=" + format_double(g.spacing()) +
           "\ncomponents=" + std::to_string(components) + "\ndata:\n";
}

} // namespace

VectorField parse_field(std::string_view bytes) {
    const FieldHeader h = parse_field_header(bytes);
    if (h.components != 2) {
        throw Error(ErrorKind::header_mismatch, "field: expected components=2, found " + std::to_string(h.components));
    }
    const Grid2D grid(h.width, h.height, h.spacing);
    std::vector<double> ux(grid.size());
    std::vector<double> uy(grid.size());
    const char *p = bytes.data() + h.payload_offset;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        ux[k] = load_le_float(p + 8 * k);
        uy[k] = load_le_float(p + 8 * k + 4);
    }
    return VectorField(grid, std::move(ux), std::move(uy));
}

Image parse_scalar_field(std::string_view bytes) {
    const FieldHeader h = parse_field_header(bytes);
    if (h.components != 1) {
        throw Error(ErrorKind::header_mismatch, "field: expected components=1, found " + std::to_string(h.components));
    }
    const Grid2D grid(h.width, h.height, h.spacing);
    std::vector<double> data(grid.size());
    const char *p = bytes.data() + h.payload_offset;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        data[k] = load_le_float(p + 4 * k);
    }
    return Image(grid, std::move(data));
}

std::string encode_field(const VectorField &field) {
    std::string out = encode_header(field.grid(), 2);
    out.reserve(out.size() + field.grid().size() * 8);
    for (std::size_t k = 0; k < field.grid().size(); ++k) {
        store_le_float(out, static_cast<float>(field.ux()[k]));
        store_le_float(out, static_cast<float>(field.uy()[k]));
    }
    return out;
}

std::string encode_field(const Image &img) {
    std::string out = encode_header(img.grid(), 1);
    out.reserve(out.size() + img.grid().size() * 4);
    for (double v : img.data()) {
        store_le_float(out, static_cast<float>(v));
    }
    return out;
}

VectorField read_field(const fs::path &path) { return parse_field(read_file(path)); }
Image read_scalar_field(const fs::path &path) { return parse_scalar_field(read_file(path)); }
void write_field(const fs::path &path, const VectorField &field) { write_file(path, encode_field(field)); }
void write_field(const fs::path &path, const Image &img) { write_file(path, encode_field(img)); }

Mask read_mask(const fs::path &path) {
    if (path.extension() == ".pgm") {
        return Mask::from_image(read_pgm(path));
    }
    return Mask::from_image(read_scalar_field(path));
}

// ---- configuration -------------------------------------------------------

namespace {

struct Line {
    int number = 0;
    std::string_view text;
};

class ConfigParser {
public:
    explicit ConfigParser(std::string_view text) {
        int number = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto end = std::min(text.find('\n', pos), text.size());
            std::string_view raw = text.substr(pos, end - pos);
            ++number;
            if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
                raw = raw.substr(0, hash);
            }
            raw = trim(raw);
            if (!raw.empty()) {
                lines_.push_back({number, raw});
            }
            pos = end + 1;
        }
    }

    MatchConfig parse() {
        MatchConfig cfg;
        std::optional<KernelSpec> kernel;
        std::set<std::string, std::less<>> seen;
        while (cursor_ < lines_.size()) {
            const Line line = lines_[cursor_++];
            if (is_open(line, "kernel")) {
                if (kernel) {
                    fail(ErrorKind::bad_value, line, "duplicate top-level kernel block");
                }
                kernel = parse_kernel(line);
                continue;
            }
            const auto [key, value] = split(line);
            if (!seen.insert(std::string(key)).second) {
                fail(ErrorKind::bad_value, line, "duplicate key '" + std::string(key) + "'");
            }
            if (key == "n_timesteps") {
                cfg.n_timesteps = as_int(line, value);
            } else if (key == "sim_weight") {
                cfg.sim_weight = as_double(line, value);
            } else if (key == "max_iters") {
                cfg.max_iters = as_int(line, value);
            } else if (key == "step_init") {
                cfg.step_init = as_double(line, value);
            } else if (key == "step_shrink") {
                cfg.step_shrink = as_double(line, value);
            } else if (key == "tol_grad") {
                cfg.tol_grad = as_double(line, value);
            } else if (key == "stepper") {
                if (value == "rk2") {
                    cfg.stepper = Stepper::rk2;
                } else if (value == "euler") {
                    cfg.stepper = Stepper::euler;
                } else {
                    fail(ErrorKind::bad_value, line, "stepper must be rk2 or euler");
                }
            } else if (key == "mask_file") {
                cfg.mask = read_mask(fs::path(std::string(value)));
            } else if (key == "momentum_mask_file") {
                cfg.momentum_mask = read_mask(fs::path(std::string(value)));
            } else {
                fail(ErrorKind::unknown_key, line, "unknown key '" + std::string(key) + "'");
            }
        }
        if (!kernel) {
            throw Error(ErrorKind::missing_kernel, "config: no kernel block");
        }
        cfg.kernel = std::move(*kernel);
        try {
            cfg.validate();
        } catch (const Error &e) {
            throw Error(ErrorKind::bad_value, std::string("config: ") + e.what());
        }
        return cfg;
    }

private:
    [[noreturn]] static void fail(ErrorKind kind, const Line &line, const std::string &what) {
        throw Error(kind, "config line " + std::to_string(line.number) + ": " + what);
    }

    static bool is_open(const Line &line, std::string_view name) {
        if (line.text.back() != '{') {
            return false;
        }
        return trim(line.text.substr(0, line.text.size() - 1)) == name;
    }

    static std::pair<std::string_view, std::string_view> split(const Line &line) {
        const auto eq = line.text.find('=');
        if (eq == std::string_view::npos) {
            fail(ErrorKind::bad_value, line, "expected 'key = value', found '" + std::string(line.text) + "'");
        }
        const auto key = trim(line.text.substr(0, eq));
        const auto value = trim(line.text.substr(eq + 1));
        if (key.empty() || value.empty()) {
            fail(ErrorKind::bad_value, line, "empty key or value");
        }
        return {key, value};
    }

    static double as_double(const Line &line, std::string_view value) {
        double v = 0.0;
        if (!parse_number(value, v) || !std::isfinite(v)) {
            fail(ErrorKind::bad_value, line, "not a number: '" + std::string(value) + "'");
        }
        return v;
    }

    static int as_int(const Line &line, std::string_view value) {
        int v = 0;
        if (!parse_number(value, v)) {
            fail(ErrorKind::bad_value, line, "not an integer: '" + std::string(value) + "'");
        }
        return v;
    }

    // Called after the opening line has been consumed.
    KernelSpec parse_kernel(const Line &open) {
        std::string family;
        std::optional<double> sigma;
        std::optional<double> amplitude;
        std::optional<double> c;
        std::optional<int> terms_declared;
        std::vector<KernelSpec> children;
        std::vector<std::pair<Image, KernelSpec>> parts;
        std::set<std::string, std::less<>> seen;

        for (;;) {
            if (cursor_ >= lines_.size()) {
                fail(ErrorKind::bad_value, open, "unterminated kernel block");
            }
            const Line line = lines_[cursor_++];
            if (line.text == "}") {
                break;
            }
            if (is_open(line, "kernel")) {
                children.push_back(parse_kernel(line));
                continue;
            }
            if (is_open(line, "part")) {
                parts.push_back(parse_part(line));
                continue;
            }
            const auto [key, value] = split(line);
            if (!seen.insert(std::string(key)).second) {
                fail(ErrorKind::bad_value, line, "duplicate key '" + std::string(key) + "'");
            }
            if (key == "family") {
                family = std::string(value);
            } else if (key == "sigma") {
                sigma = as_double(line, value);
            } else if (key == "amplitude") {
                amplitude = as_double(line, value);
            } else if (key == "c") {
                c = as_double(line, value);
            } else if (key == "terms") {
                terms_declared = as_int(line, value);
            } else {
                fail(ErrorKind::unknown_key, line, "unknown kernel key '" + std::string(key) + "'");
            }
        }

        const auto reject_extra = [&](bool bad, const std::string &what) {
            if (bad) {
                fail(ErrorKind::bad_value, open, family + " kernel: " + what);
            }
        };
        try {
            if (family == "gaussian") {
                reject_extra(!sigma, "missing sigma");
                reject_extra(c || terms_declared || !children.empty() || !parts.empty(),
                             "only sigma and amplitude are allowed");
                if (!(*sigma > 0.0)) {
                    fail(ErrorKind::bad_value, open, "sigma must be > 0");
                }
                return KernelSpec::gaussian(*sigma, amplitude.value_or(1.0));
            }
            if (family == "sum") {
                reject_extra(sigma || amplitude || c || !parts.empty(), "only nested kernel blocks are allowed");
                if (children.empty()) {
                    throw Error(ErrorKind::missing_kernel, "config: sum kernel without terms");
                }
                reject_extra(terms_declared && *terms_declared != static_cast<int>(children.size()),
                             "terms does not match the number of nested kernels");
                return KernelSpec::sum(std::move(children));
            }
            if (family == "symmetrized") {
                reject_extra(sigma || amplitude || terms_declared || !parts.empty(),
                             "only c and one nested kernel are allowed");
                reject_extra(!c, "missing c");
                if (!(*c >= 0.0 && *c <= 1.0)) {
                    fail(ErrorKind::bad_value, open, "c must lie in [0,1]");
                }
                if (children.size() != 1) {
                    throw Error(ErrorKind::missing_kernel, "config: symmetrized kernel needs exactly one inner kernel");
                }
                return KernelSpec::symmetrized(*c, std::move(children.front()));
            }
            if (family == "partition") {
                reject_extra(sigma || amplitude || c || terms_declared || !children.empty(),
                             "only part blocks are allowed");
                if (parts.empty()) {
                    throw Error(ErrorKind::missing_kernel, "config: partition kernel without parts");
                }
                return KernelSpec::partition(std::move(parts));
            }
        } catch (const Error &e) {
            if (e.kind() == ErrorKind::invalid_argument) {
                fail(ErrorKind::bad_value, open, e.what());
            }
            throw;
        }
        fail(ErrorKind::bad_value, open, "unknown kernel family '" + family + "'");
    }

    std::pair<Image, KernelSpec> parse_part(const Line &open) {
        std::optional<Image> weights;
        std::optional<KernelSpec> inner;
        for (;;) {
            if (cursor_ >= lines_.size()) {
                fail(ErrorKind::bad_value, open, "unterminated part block");
            }
            const Line line = lines_[cursor_++];
            if (line.text == "}") {
                break;
            }
            if (is_open(line, "kernel")) {
                if (inner) {
                    fail(ErrorKind::bad_value, line, "part holds more than one kernel");
                }
                inner = parse_kernel(line);
                continue;
            }
            const auto [key, value] = split(line);
            if (key != "weights_file") {
                fail(ErrorKind::unknown_key, line, "unknown part key '" + std::string(key) + "'");
            }
            const fs::path path{std::string(value)};
            weights = path.extension() == ".pgm" ? read_pgm(path) : read_scalar_field(path);
        }
        if (!weights) {
            fail(ErrorKind::bad_value, open, "part without weights_file");
        }
        if (!inner) {
            throw Error(ErrorKind::missing_kernel, "config: part without kernel");
        }
        return {std::move(*weights), std::move(*inner)};
    }

    std::vector<Line> lines_;
    std::size_t cursor_ = 0;
};

} // namespace

MatchConfig parse_config(std::string_view text) { return ConfigParser(text).parse(); }

MatchConfig read_config(const fs::path &path) { return parse_config(read_file(path)); }

} // namespace lddm::io
