#![no_main]
use htq_cli::plot::{render_svg, Figure};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = htq_cli::parse_plot_csv(data) else {
        return;
    };
    if table.headers.len() < 2 {
        return;
    }
    let (x, y) = (table.headers[0].clone(), table.headers[1].clone());
    if let Ok(series) = table.series(&x, &y, None, "s") {
        let _ = render_svg(&Figure {
            title: String::new(),
            x_label: x,
            y_label: y,
            log_y: false,
            series,
        });
    }
});
