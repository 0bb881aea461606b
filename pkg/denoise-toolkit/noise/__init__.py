# noise 패키지 초기화
