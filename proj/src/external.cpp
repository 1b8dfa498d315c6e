// External-process backend: scenario files in, trip-info XML out.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "trafficlens/csv.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/simkit.hpp"

namespace trafficlens::simkit {

namespace {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

std::string substitute(std::string text, const std::string& key, const std::string& value) {
  const std::string token = "${" + key + "}";
  for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + value.size()))
    text.replace(pos, token.size(), value);
  return text;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw BackendError("cannot write " + p.string());
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double attr_double(const pt::ptree& node, const char* name, bool required) {
  const auto v = node.get_optional<std::string>(std::string("<xmlattr>.") + name);
  if (!v) {
    if (required) throw ParseError(std::string("<tripinfo> lacks attribute '") + name + "'");
    return 0.0;
  }
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing text");
    return d;
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + name + " value '" + *v + "'");
  }
}

}  // namespace

std::string routes_xml(const Network& net, std::span<const VehicleSpec> vehicles) {
  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<routes>\n";
  for (const auto& v : vehicles) {
    std::vector<const Movement*> legs;
    for (const auto& key : v.route)
      for (const auto& mid : net.resolve(key)) legs.push_back(net.movement(mid));
    std::string edges = legs.front()->in_link;
    for (const auto* m : legs)
      if (m->out_link) edges += " " + *m->out_link;
    out << "    <vehicle id=\"" << xml_escape(v.id) << "\" depart=\"" << csv::format_double(v.depart)
        << "\" speedFactor=\"" << csv::format_double(v.speed_factor) << "\">\n";
    out << "        <route edges=\"" << xml_escape(edges) << "\"/>\n    </vehicle>\n";
  }
  out << "</routes>\n";
  return out.str();
}

std::vector<VehicleResult> parse_tripinfo(const std::string& xml) {
  pt::ptree tree;
  try {
    std::istringstream in(xml);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("bad trip-info XML: ") + e.what());
  }
  const auto root = tree.get_child_optional("tripinfos");
  if (!root) throw ParseError("trip-info XML lacks <tripinfos>");
  std::vector<VehicleResult> out;
  for (const auto& [name, node] : *root) {
    if (name != "tripinfo") continue;
    VehicleResult v;
    const auto id = node.get_optional<std::string>("<xmlattr>.id");
    if (!id) throw ParseError("<tripinfo> lacks attribute 'id'");
    v.id = *id;
    v.depart = attr_double(node, "depart", true);
    v.arrive = attr_double(node, "arrival", true);
    v.travel_time = attr_double(node, "duration", true);
    v.delay = attr_double(node, "timeLoss", false);
    v.stops = static_cast<int>(attr_double(node, "waitingCount", false));
    out.push_back(std::move(v));
  }
  return out;
}

RunResult run_external(const ExternalScenario& scenario, const std::string& command_template,
                       const fs::path& workdir, std::chrono::duration<double> timeout) {
  if (command_template.find("${config}") == std::string::npos || command_template.find("${output}") == std::string::npos)
    throw InputError("external command template needs ${config} and ${output} placeholders");
  fs::create_directories(workdir);
  const fs::path dir = fs::absolute(workdir);

  nlohmann::json config = {{"scenario_id", scenario.scenario_id},
                           {"network", to_json(scenario.network)},
                           {"routes", (dir / "routes.rou.xml").string()}};
  write_text(dir / "routes.rou.xml", routes_xml(scenario.network, scenario.vehicles));
  nlohmann::json tls = nlohmann::json::object();
  for (const auto& [iid, prog] : scenario.programs) {
    const fs::path p = dir / (iid + ".tls.xml");
    write_text(p, signal::emit_tls_program(prog.first, signal::default_movement_map(), iid, "0", prog.second));
    tls[iid] = p.string();
  }
  config["tls_programs"] = tls;
  const fs::path config_path = dir / "scenario.json";
  const fs::path output_path = dir / "tripinfo.xml";
  const fs::path log_path = dir / "backend.log";
  write_text(config_path, config.dump(2) + "\n");
  fs::remove(output_path);

  std::string command = substitute(command_template, "config", shell_quote(config_path.string()));
  command = substitute(command, "output", shell_quote(output_path.string()));

  const pid_t pid = fork();
  if (pid < 0) throw BackendError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    setpgid(0, 0);
    const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      dup2(fd, STDOUT_FILENO);
      dup2(fd, STDERR_FILENO);
      close(fd);
    }
    if (chdir(dir.c_str()) != 0) _exit(127);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR) throw BackendError(std::string("waitpid failed: ") + std::strerror(errno));
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      throw TimeoutError("external backend timed out after " + std::to_string(timeout.count()) + " s", -1,
                         read_text(log_path));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  if (code != 0)
    throw BackendError("external backend exited with code " + std::to_string(code), code, read_text(log_path));
  if (!fs::exists(output_path)) throw ParseError("external backend produced no trip-info output");

  RunResult r;
  r.scenario_id = scenario.scenario_id;
  auto trips = parse_tripinfo(read_text(output_path));
  // Keep input order; vehicles missing from the output are incomplete.
  std::map<std::string, VehicleResult> by_id;
  for (auto& t : trips) by_id[t.id] = std::move(t);
  for (const auto& v : scenario.vehicles) {
    const auto it = by_id.find(v.id);
    if (it != by_id.end()) {
      r.vehicles.push_back(it->second);
      by_id.erase(it);
    } else {
      r.vehicles.push_back({v.id, v.depart, std::nullopt, 0.0, 0.0, 0});
    }
  }
  for (auto& [id, t] : by_id) r.vehicles.push_back(std::move(t));  // trips the scenario did not list
  summarize(r);
  return r;
}

}  // namespace trafficlens::simkit
