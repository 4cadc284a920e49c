#include "d3pmlab/training.hpp"

#include <fstream>
#include <iomanip>

namespace d3pmlab {

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Errc::io_error, "cannot open " + path.string() + " for writing");
  out << "step,loss,lr,global_step\n";
  out << std::setprecision(17);
  for (const auto& row : rows) {
    out << row.step << ',' << row.loss << ',' << row.lr << ',' << row.step << '\n';
  }
  require(out.good(), Errc::io_error, "failed writing " + path.string());
}

}  // namespace d3pmlab
