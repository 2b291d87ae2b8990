#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace netctl {

// Deterministic JSON emission: keys in insertion order, all floating-point
// values with 17 significant digits (%.17g), so reruns are byte-identical.
class json_writer {
  public:
    std::string str() const { return out_; }

    json_writer& begin_object() { return open('{'); }
    json_writer& end_object() { return close('}'); }
    json_writer& begin_array() { return open('['); }
    json_writer& end_array() { return close(']'); }

    json_writer& key(const std::string& k) {
        comma();
        emit_string(k);
        out_ += ':';
        pending_value_ = true;
        return *this;
    }

    json_writer& value(double v) {
        comma();
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out_ += buf;
        return *this;
    }
    json_writer& value(std::uint64_t v) {
        comma();
        out_ += std::to_string(v);
        return *this;
    }
    json_writer& value(int v) {
        comma();
        out_ += std::to_string(v);
        return *this;
    }
    json_writer& value(bool v) {
        comma();
        out_ += v ? "true" : "false";
        return *this;
    }
    json_writer& value(const std::string& v) {
        comma();
        emit_string(v);
        return *this;
    }
    json_writer& value(const char* v) { return value(std::string(v)); }

    // splice pre-serialized JSON (e.g. a config object that was hashed first)
    json_writer& raw(const std::string& r) {
        comma();
        out_ += r;
        return *this;
    }

    template <typename T>
    json_writer& kv(const std::string& k, const T& v) {
        key(k);
        return value(v);
    }

    json_writer& numbers(const std::vector<double>& vs) {
        begin_array();
        for (double v : vs) value(v);
        return end_array();
    }

  private:
    json_writer& open(char c) {
        comma();
        out_ += c;
        first_ = true;
        return *this;
    }
    json_writer& close(char c) {
        out_ += c;
        first_ = false;
        return *this;
    }
    void comma() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        if (!first_) out_ += ',';
        first_ = false;
    }
    void emit_string(const std::string& s) {
        out_ += '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\t': out_ += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out_ += buf;
                    } else {
                        out_ += c;
                    }
            }
        }
        out_ += '"';
    }

    std::string out_;
    bool first_ = true;
    bool pending_value_ = false;
};

// FNV-1a 64-bit over the canonical config string; echoed in every manifest so
// outputs are traceable to their exact configuration.
inline std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace netctl
