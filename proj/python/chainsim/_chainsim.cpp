#include <pybind11/pybind11.h>
PYBIND11_MODULE(_chainsim, m) { m.doc() = "stub"; }
