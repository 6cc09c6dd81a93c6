#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mxd/types.hpp"

namespace mxd {

enum class TouchstoneFormat { RI, MA, DB };

/// Touchstone v1 S-parameter data. Matrices are held in RI form regardless of
/// the on-disk format; frequencies are in Hz.
struct TouchstoneDocument {
    int n_ports = 1;
    std::vector<std::pair<double, CMatrix>> frequency_points;
    TouchstoneFormat format = TouchstoneFormat::RI;
    double reference_impedance = 50.0;
    std::string frequency_unit = "GHz"; // used when writing
    std::vector<std::string> comments;  // without the leading '!'
};

/// Parses `.sNp` content. When n_ports is not given it is inferred from the
/// number of values in the first frequency record.
///
/// Accepted layout: option line `# <unit> S <RI|MA|DB> R <z0>` (missing
/// fields take the v1 defaults GHz / MA / 50), `!` comments anywhere, one
/// record per frequency. 2-ports list S11 S21 S12 S22 on one line; larger
/// networks are row-major with at most four pairs per line, each matrix row
/// starting on a new line.
///
/// Throws ParseError with line and column on malformed option lines, bad
/// numbers, wrong value counts and non-increasing frequencies.
TouchstoneDocument parse_touchstone(std::string_view text, std::optional<int> n_ports = std::nullopt);

std::string write_touchstone(const TouchstoneDocument& doc);

/// Port count from a `.sNp` file name, if it has one.
std::optional<int> touchstone_ports_from_name(std::string_view filename);

} // namespace mxd
