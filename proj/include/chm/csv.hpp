#pragma once

#include <string>
#include <vector>

#include "chm/fluxframe.hpp"

namespace chm {

// RFC 4180 CSV reader for flux-tower style tables.
//
// Column conventions: a TIMESTAMP column (YYYYMMDDHHMM integers) is used when
// present, otherwise sequential half-hourly timestamps are synthesized
// starting 2000-01-01 00:00. Empty cells and the -9999 sentinel become
// missing values (NaN, quality=false). A companion `<col>_QC` column, when
// present, marks rows with QC <= qc_max as measured.
//
// `schema` lists the columns that must exist; they are parsed as doubles.
// With an empty schema every column except TIMESTAMP and `*_QC` is loaded.
FluxFrame load_csv(const std::string& path, const std::vector<std::string>& schema,
                   int qc_max = 0);

// Writes TIMESTAMP, data columns and a `<col>_QC` column (0 measured, 1 not)
// for every column carrying a mask. Values use shortest round-trip formatting;
// missing values are written as -9999.
void write_csv(const FluxFrame& frame, const std::string& path);

// Sequential half-hourly YYYYMMDDHHMM timestamps (Gregorian, leap years).
std::vector<std::int64_t> make_halfhourly_timestamps(int start_year, std::size_t count);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

} // namespace chm
