// Serves the mock imagery API, chat backend and (optionally) Overpass on one port.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "streetscape/files.hpp"
#include "streetscape/mock_services.hpp"

int main(int argc, char** argv) {
  std::string host = "127.0.0.1";
  int port = 8765;
  std::string overpass;
  CLI::App app{"Offline stand-ins for the street imagery API, the VLM backend and Overpass"};
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  app.add_option("--overpass", overpass, "Overpass JSON document to serve")->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  streetscape::mock::Options options;
  if (!overpass.empty()) options.overpass_document = streetscape::read_file(overpass);
  streetscape::mock::MockServices services(options);
  std::cout << "imagery  http://" << host << ":" << port << "/streetview\n"
            << "backend  http://" << host << ":" << port << "/v1\n"
            << "overpass http://" << host << ":" << port << "/api/interpreter\n"
            << std::flush;
  services.listen_blocking(host, port);
  return 0;
}
