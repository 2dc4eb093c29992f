#ifndef RRDPS_TOOLS_CSV_HPP_
#define RRDPS_TOOLS_CSV_HPP_

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace rrdps::cli {

// '.' decimal point, 17 significant digits, no locale surprises.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_int(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void metadata(const std::string& key, const std::string& value) {
        out_ << "# " << key << " = " << value << "\n";
    }
    void metadata(const std::string& key, double value) {
        metadata(key, format_real(value));
    }

    void header(const std::vector<std::string>& names) {
        write_row(names);
    }

    void row(const std::vector<std::string>& fields) { write_row(fields); }

private:
    void write_row(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << fields[i];
        }
        out_ << "\n";
    }
    std::ostream& out_;
};

}  // namespace rrdps::cli

#endif  // RRDPS_TOOLS_CSV_HPP_
