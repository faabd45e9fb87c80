//! Reference frontier coordinates for `μ* = 3.627`.
//!
//! Each pair is `(10·β′, 10/μ′)`: both axes are scaled by ten. The curve
//! also passes through the anchor `(0, 10/3.627)`, which is not repeated
//! here.

/// `(10·β′, 10/μ′)` samples of the achievable frontier, ordered by
/// decreasing `1/μ′`.
#[allow(clippy::excessive_precision)]
pub const SCALED_FRONTIER_3627: [(f64, f64); 53] = [
    (3.97560615940892, 0.304942511446948),
    (4.08687551008228, 0.241938247074105),
    (4.14395185864106, 0.212492019676073),
    (4.18848005771410, 0.190864774858869),
    (4.22639670594639, 0.173375279181456),
    (4.26004630944888, 0.158565973092125),
    (4.29064277330748, 0.145680286429480),
    (4.31891161042890, 0.134264910850402),
    (4.34532763048766, 0.124022438252995),
    (4.37022179406831, 0.114745044435068),
    (4.39383577845581, 0.106280589201336),
    (4.41635249705710, 0.0985136361705596),
    (4.43791438217050, 0.0913540709442582),
    (4.45863494254992, 0.0847298986167024),
    (4.47860639339929, 0.0785824839856242),
    (4.49790487683765, 0.0728632915246918),
    (4.51659414256492, 0.0675315845313478),
    (4.53472821008394, 0.0625527591887812),
    (4.55235333720022, 0.0578971114489503),
    (4.56950950380316, 0.0535389065774242),
    (4.58623154934287, 0.0494556651057623),
    (4.60255005798812, 0.0456276065853940),
    (4.61849205670940, 0.0420372104328875),
    (4.63408157247476, 0.0386688650283846),
    (4.64934008185885, 0.0355085842622566),
    (4.66428687740426, 0.0325437763126255),
    (4.67893936887402, 0.0297630533076069),
    (4.69331333299157, 0.0271560733600360),
    (4.70742312205696, 0.0247134084675097),
    (4.72128183942937, 0.0224264332692893),
    (4.73490148809463, 0.0202872307596161),
    (4.74829309720156, 0.0182885118921182),
    (4.76146683043664, 0.0164235466449761),
    (4.77443207932787, 0.0146861046044328),
    (4.78719754396506, 0.0130704035023392),
    (4.79977130315291, 0.0115710644389590),
    (4.81216087564151, 0.0101830727551690),
    (4.82437327378500, 0.00890174370310460),
    (4.83641505074225, 0.00772269221261710),
    (4.84829234215362, 0.00664180616477294),
    (4.86001090304469, 0.00565522269682278),
    (4.87157614063861, 0.00475930711003692),
    (4.88299314359456, 0.00395063405138396),
    (4.89426670814881, 0.00322597066850953),
    (4.90540136154829, 0.00258226149079616),
    (4.91640138311252, 0.00201661482394013),
    (4.92727082321111, 0.00152629047575281),
    (4.93801352040403, 0.00110868865647052),
    (4.94863311695878, 0.000761339917631317),
    (4.95913307292242, 0.000481896015981413),
    (4.96951667892789, 0.000268121589815320),
    (4.97978706784350, 0.000117886576083289),
    (4.98994722541618, 0.0000291592746097554),
];

/// `μ*` the reference data was computed for.
pub const REFERENCE_MU_STAR: f64 = 3.627;

/// `(β′, 1/μ′)` in natural units.
pub fn frontier_3627() -> impl Iterator<Item = (f64, f64)> {
    SCALED_FRONTIER_3627.iter().map(|&(x, y)| (x / 10.0, y / 10.0))
}
