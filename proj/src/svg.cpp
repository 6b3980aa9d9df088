#include "vpreg/svg.hpp"

#include <sstream>

#include "vpreg/io.hpp"

namespace vpreg {

std::string grid_svg(const std::vector<GridLayer>& layers, int stride, double scale) {
  if (layers.empty() || !layers.front().map) throw Error(ErrorCode::InvalidArgument, "grid_svg needs a map");
  if (stride < 1) throw Error(ErrorCode::InvalidArgument, "grid stride must be >= 1");
  const Domain& dom = layers.front().map->domain();
  if (dom.dim() != 2) throw Error(ErrorCode::InvalidArgument, "grid_svg draws 2-D maps only");
  const int nx = dom.extent(0), ny = dom.extent(1);
  const double pad = 2 * scale;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_number((nx - 1) * scale + 2 * pad)
      << "\" height=\"" << format_number((ny - 1) * scale + 2 * pad) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto pt = [&](const Transform& m, int x, int y) {
    const std::size_t i = dom.index(x, y);
    // y axis points down in the image, as in a slice view
    return format_number(pad + m.coords()[0][i] * scale) + "," + format_number(pad + m.coords()[1][i] * scale);
  };
  for (const auto& layer : layers) {
    require_same_domain(dom, layer.map->domain(), "grid_svg");
    out << "<g fill=\"none\" stroke=\"" << layer.color << "\" stroke-width=\"" << format_number(layer.width) << "\">\n";
    for (int y = 0; y < ny; y += stride) {
      out << "<polyline points=\"";
      for (int x = 0; x < nx; ++x) out << (x ? " " : "") << pt(*layer.map, x, y);
      out << "\"/>\n";
    }
    for (int x = 0; x < nx; x += stride) {
      out << "<polyline points=\"";
      for (int y = 0; y < ny; ++y) out << (y ? " " : "") << pt(*layer.map, x, y);
      out << "\"/>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace vpreg
