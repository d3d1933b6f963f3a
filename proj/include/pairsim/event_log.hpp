#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairsim/frame.hpp"
#include "pairsim/mac_params.hpp"
#include "pairsim/trace.hpp"

namespace pairsim {

// One row of the exported simulation log. `station` is the claimed sender for
// frame rows, the observer for busy/outcome rows, and the acting party for
// timer/alarm/key rows. dest < 0 means "not applicable".
struct EventRecord {
    usec time_us = 0;
    std::string event_kind;
    std::int64_t station = -1;
    std::int64_t dest = -1;
    std::uint64_t payload_len = 0;
    std::string outcome;
};

class EventLog {
  public:
    void add(usec t, std::string kind, std::int64_t station, std::int64_t dest,
             std::uint64_t payload_len, std::string outcome) {
        rows_.push_back({t, std::move(kind), station, dest, payload_len, std::move(outcome)});
    }

    const std::vector<EventRecord>& rows() const { return rows_; }

    void write_csv(std::ostream& os) const {
        os << "time_us,event_kind,station,dest,payload_len,outcome\n";
        for (const auto& r : rows_) {
            os << r.time_us << ',' << r.event_kind << ',' << r.station << ',' << r.dest << ','
               << r.payload_len << ',' << r.outcome << '\n';
        }
    }

    void write_csv(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open " + path + " for writing");
        write_csv(f);
    }

  private:
    std::vector<EventRecord> rows_;
};

inline std::vector<EventRecord> read_event_csv(std::istream& is) {
    std::vector<EventRecord> rows;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("event csv: empty file");
    if (line != "time_us,event_kind,station,dest,payload_len,outcome")
        throw std::runtime_error("event csv: unexpected header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        EventRecord r;
        std::stringstream ss(line);
        std::string field;
        auto next = [&](const char* what) {
            if (!std::getline(ss, field, ',')) throw std::runtime_error(std::string("event csv: missing ") + what);
            return field;
        };
        r.time_us = std::stoull(next("time_us"));
        r.event_kind = next("event_kind");
        r.station = std::stoll(next("station"));
        r.dest = std::stoll(next("dest"));
        r.payload_len = std::stoull(next("payload_len"));
        std::getline(ss, r.outcome);  // last field, may be empty
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<EventRecord> read_event_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return read_event_csv(f);
}

// Rebuilds an observer's busy/idle record from exported busy rows, enabling
// offline re-classification of a logged run.
inline ChannelTrace trace_from_events(const std::vector<EventRecord>& rows, StationId observer) {
    ChannelTrace trace(observer, 0);
    usec open = 0;
    bool in_busy = false;
    usec last_t = 0;
    for (const auto& r : rows) {
        last_t = r.time_us;
        if (r.station != static_cast<std::int64_t>(observer)) continue;
        if (r.event_kind == "busy_start") {
            open = r.time_us;
            in_busy = true;
        } else if (r.event_kind == "busy_end" && in_busy) {
            trace.add_busy(open, r.time_us);
            in_busy = false;
        }
    }
    trace.close(last_t);
    return trace;
}

}  // namespace pairsim
