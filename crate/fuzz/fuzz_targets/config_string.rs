#![no_main]
use current_lab::exact::Space;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let dims = data[1] as usize % 12;
    let space = match data[0] % 3 {
        0 => Space::spins(dims),
        1 => Space::edges(dims),
        _ => Space::parity(dims),
    };
    if let Ok(text) = std::str::from_utf8(&data[2..]) {
        if let Ok(i) = space.parse_config(text) {
            assert_eq!(space.config_string(i), text);
        }
    }
});
