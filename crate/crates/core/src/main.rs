fn main() {
    std::process::exit(wifi_mode_detect::cli::dispatch(std::env::args_os()));
}
