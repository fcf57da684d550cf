use serde::{Deserialize, Serialize};

use super::{GeoError, WorldBBox};

/// A fully substituted map request. Building one performs no I/O.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteRequest {
    pub url: String,
    pub content_type: String,
}

const REQUIRED: [&str; 3] = ["{bbox}", "{w}", "{h}"];

/// Substitutes `{bbox}`, `{w}`, `{h}` and (if present) `{crs}` in a map-service
/// URL template. The bbox is written as `minx,miny,maxx,maxy` with two
/// decimals.
///
/// The expected content type is taken from a `format=` query parameter when
/// the template has one, and defaults to `image/png`.
pub fn build_remote_request(
    template: &str,
    bbox: &WorldBBox,
    size_px: (u32, u32),
    crs_id: &str,
) -> Result<RemoteRequest, GeoError> {
    bbox.validate()?;
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .filter(|p| !template.contains(p))
        .collect();
    if !missing.is_empty() {
        return Err(GeoError::TemplateError(format!(
            "missing placeholder(s): {}",
            missing.join(", ")
        )));
    }
    let bbox_str = format!(
        "{:.2},{:.2},{:.2},{:.2}",
        bbox.min_x, bbox.min_y, bbox.max_x, bbox.max_y
    );
    let url = template
        .replace("{bbox}", &bbox_str)
        .replace("{w}", &size_px.0.to_string())
        .replace("{h}", &size_px.1.to_string())
        .replace("{crs}", crs_id);
    Ok(RemoteRequest {
        content_type: content_type_of(&url),
        url,
    })
}

fn content_type_of(url: &str) -> String {
    let query = url.split_once('?').map_or("", |(_, q)| q);
    query
        .split('&')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| k.eq_ignore_ascii_case("format"))
        .map(|(_, v)| v.replace("%2F", "/").replace("%2f", "/"))
        .unwrap_or_else(|| "image/png".to_string())
}

/// Pixel dimensions that cover `bbox` at `resolution`, rounded to the
/// nearest integer.
pub fn pixel_size_for(bbox: &WorldBBox, resolution: f64) -> (u32, u32) {
    (
        (bbox.width() / resolution).round() as u32,
        (bbox.height() / resolution).round() as u32,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const WMS: &str = "https://example.org/wms?SERVICE=WMS&REQUEST=GetMap&LAYERS=dop10&CRS={crs}&BBOX={bbox}&WIDTH={w}&HEIGHT={h}&FORMAT=image/jpeg";

    #[test]
    fn substitutes_placeholders() {
        let b = WorldBBox::new(0.0, 0.0, 33.0, 33.0).unwrap();
        let r = build_remote_request("http://h/m?bbox={bbox}&w={w}&h={h}", &b, (330, 330), "x").unwrap();
        assert!(r.url.contains("0.00,0.00,33.00,33.00"));
        assert!(r.url.contains("w=330&h=330"));
        assert_eq!(r.content_type, "image/png");
    }

    #[test]
    fn wms_template() {
        let b = WorldBBox::new(320000.0, 5630000.0, 320050.0, 5630050.0).unwrap();
        let r = build_remote_request(WMS, &b, pixel_size_for(&b, 0.1), "EPSG:25832").unwrap();
        assert!(r.url.contains("CRS=EPSG:25832"));
        assert!(r.url.contains("BBOX=320000.00,5630000.00,320050.00,5630050.00"));
        assert!(r.url.contains("WIDTH=500&HEIGHT=500"));
        assert_eq!(r.content_type, "image/jpeg");
    }

    #[test]
    fn missing_bbox_placeholder() {
        let b = WorldBBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let err = build_remote_request("http://h/m?w={w}&h={h}", &b, (10, 10), "x").unwrap_err();
        assert!(matches!(err, GeoError::TemplateError(m) if m.contains("{bbox}")));
    }

    #[test]
    fn size_rounds_to_nearest_pixel() {
        // 33.04 m at 0.1 m/px is 330.4 px
        let b = WorldBBox::new(0.0, 0.0, 33.04, 33.06).unwrap();
        assert_eq!(pixel_size_for(&b, 0.1), (330, 331));
    }
}
