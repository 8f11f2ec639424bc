#![no_main]
use current_lab::exact::FiniteDistribution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = FiniteDistribution::read_dump(data) {
        let again = FiniteDistribution::read_dump(d.dump_string().as_bytes()).expect("re-read");
        assert_eq!(again.len(), d.len());
    }
});
