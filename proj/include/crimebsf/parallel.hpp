#pragma once

namespace crimebsf {

// Which implementation of a data-parallel kernel to run. Both produce
// bit-identical results; Serial is the reference.
enum class Backend { Serial, OpenMP };

}  // namespace crimebsf
