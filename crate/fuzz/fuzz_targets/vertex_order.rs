#![no_main]
use current_lab::vrjp::parse_order;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.is_empty() {
        return;
    }
    let n = data[0] as usize % 16;
    if let Ok(text) = std::str::from_utf8(&data[1..]) {
        if let Ok(order) = parse_order(text, n) {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }
    }
});
